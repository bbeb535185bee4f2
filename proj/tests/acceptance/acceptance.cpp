// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "nlos/graph/block.hpp"
#include "nlos/io/config.hpp"
#include "nlos/io/container.hpp"
#include "nlos/io/dataset.hpp"
#include "nlos/network/network.hpp"
#include "nlos/physics/transport.hpp"
#include "nlos/tensor/ops.hpp"
#include "nlos/training/metrics.hpp"
#include "nlos/training/training.hpp"
#include "nlos/verify/gradcheck.hpp"
#include "support/oracles.hpp"

namespace fs = std::filesystem;
using namespace nlos;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

std::string fmt(const char* f, double a, double b) {
  char buf[160];
  std::snprintf(buf, sizeof buf, f, a, b);
  return buf;
}

physics::SamplingGeometry geometry(std::size_t nx, std::size_t nt, std::size_t nz) {
  physics::SamplingGeometry g;
  g.n_x = g.n_y = nx;
  g.n_t = nt;
  g.n_z = nz;
  return g;
}

// Desk corpus settings shared by criteria 6, 7, 8 and 10.
io::RunConfig desk_config() {
  io::RunConfig c;  // 16 x 16 scan, 64 bins, 16 x 16 x 32 volume
  c.train.lr_init = 2e-3;
  c.train.stage1_epochs = 200;
  c.train.stage2_epochs = 100;
  return c;
}

std::vector<training::TrainSample> desk_corpus(const fs::path& dir) {
  const io::RunConfig c = desk_config();
  fs::remove_all(dir);
  io::generate_dataset(c, dir, 4, c.data_seed);
  return io::load_dataset(dir);
}

struct Scores {
  double psnr = 0, ssim = 0, rmse = 0, mad = 0;
};

Scores score(const training::Model& m, const std::vector<training::TrainSample>& data,
             training::Strategy strategy) {
  Scores s;
  for (const training::TrainSample& t : data) {
    const training::Reconstruction r = training::reconstruct(m, t.measurement, strategy);
    const Tensor albedo =
        training::clamp(network::albedo_project(DiffTensor(r.albedo_voxel)).value(), 0.0, 1.0);
    const Tensor depth = network::depth_project(r.depth_voxel, t.measurement.geometry.z_res());
    s.psnr += training::psnr(albedo, t.albedo[0]);
    s.ssim += training::ssim(albedo, t.albedo[0]);
    s.rmse += training::rmse(depth, t.depth[0]);
    s.mad += training::mad(depth, t.depth[0]);
  }
  const double n = static_cast<double>(data.size());
  return {s.psnr / n, s.ssim / n, s.rmse / n, s.mad / n};
}

std::vector<std::uint8_t> branch_bytes(const ParamSet& branch, const std::string& prefix) {
  ParamSet p;
  p.merge(branch, prefix);
  return io::encode(p);
}

// --- criteria ------------------------------------------------------------------

Outcome adjoint_identity() {
  const auto t0 = Clock::now();
  const verify::AdjointReport r = verify::adjoint_check(geometry(8, 64, 16), 20, 1234);
  const double dt = seconds_since(t0);
  return {r.trials == 20 && r.max_discrepancy < 1e-10 && dt < 5.0,
          fmt("max discrepancy %.2e, %.2f s", r.max_discrepancy, dt)};
}

Outcome forward_oracle() {
  // Single scatterer: every scan point sees exactly one nonzero bin.
  const physics::SamplingGeometry g = geometry(8, 64, 16);
  const physics::TransportOperator op(g);
  const double a = 0.8;
  const std::size_t vi = 3, vj = 5, vw = 9;
  Tensor x(g.volume_shape());
  x.at(vi, vj, vw) = a;
  const Tensor h = op.forward(x);
  double worst = 0.0;
  bool single = true;
  for (std::size_t u = 0; u < g.n_x; ++u)
    for (std::size_t v = 0; v < g.n_y; ++v) {
      const double r = oracle::distance(g, u, v, vi, vj, vw);
      const long bin = oracle::time_bin(r, g);
      const double want = a * g.voxel_volume() / std::pow(r, 4);
      std::size_t nonzero = 0;
      for (std::size_t t = 0; t < g.n_t; ++t) nonzero += h.at(u, v, t) != 0.0;
      single = single && nonzero == 1 && bin >= 0 && bin < static_cast<long>(g.n_t);
      if (single) {
        worst = std::max(worst, std::abs(h.at(u, v, static_cast<std::size_t>(bin)) - want) / want);
      }
    }

  const physics::SamplingGeometry s = geometry(4, 20, 8);
  const std::vector<double> dense = oracle::dense_transport(s);
  const Tensor xs = oracle::random(s.volume_shape(), 77, 0.0, 1.0);
  const Tensor got = physics::TransportOperator(s).forward(xs);
  const Tensor want = oracle::apply(dense, xs, s.measurement_shape());
  double scale = 0.0, dense_err = 0.0;
  for (std::size_t i = 0; i < want.size(); ++i) scale = std::max(scale, std::abs(want[i]));
  for (std::size_t i = 0; i < want.size(); ++i) dense_err = std::max(dense_err, std::abs(got[i] - want[i]));
  dense_err /= scale;
  return {single && worst < 1e-12 && dense_err < 1e-12,
          fmt("scatterer rel err %.1e, dense-matrix rel err %.1e", worst, dense_err)};
}

Outcome gradient_suite() {
  const auto t0 = Clock::now();
  const std::vector<verify::SuiteEntry> entries = verify::gradient_suite(5, 2024, 1e-4);
  const double dt = seconds_since(t0);
  bool ok = !entries.empty();
  double worst = 0.0;
  std::string failed;
  for (const verify::SuiteEntry& e : entries) {
    worst = std::max(worst, e.max_error);
    if (!e.passed || e.instances < 5) {
      ok = false;
      failed += " " + e.name;
    }
  }
  std::string detail = std::to_string(entries.size()) + " checks, " +
                       fmt("max rel err %.2e, %.1f s", worst, dt);
  if (!failed.empty()) detail += ", failed:" + failed;
  return {ok && dt < 60.0, detail};
}

Outcome graph_oracles() {
  bool knn_ok = true, dominance_ok = true, neg_ok = true;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    graph::PatchFeatures p;
    p.x = DiffTensor(oracle::random({64, 8}, 500 + seed));
    p.grid_h = p.grid_w = 8;
    p.channels = 8;
    knn_ok = knn_ok && graph::knn(p.x.value(), 8) == oracle::brute_knn(p.x.value(), 8);

    const Tensor neg = graph::negative_vertex(p);
    for (std::size_t d = 0; d < 8; ++d) {
      double m = 0.0;
      for (std::size_t r : {0u, 7u, 56u, 63u, 9u, 14u, 49u, 54u}) m += p.x.value().at(r, d);
      neg_ok = neg_ok && std::abs(neg[d] - m / 8.0) < 1e-14;
    }

    graph::Graph g = graph::build_graph(p, 9);
    graph::select_neighbors(p, g, neg, 6);
    for (std::size_t i = 0; i < 64; ++i) {
      double kept = 1e300, dropped = 0.0;
      const auto sel = g.selected_of(i);
      for (std::size_t j : g.neighbors_of(i)) {
        const double d = oracle::row_distance(p.x.value(), j, neg);
        if (std::find(sel.begin(), sel.end(), j) != sel.end()) {
          kept = std::min(kept, d);
        } else {
          dropped = std::max(dropped, d);
        }
      }
      dominance_ok = dominance_ok && kept >= dropped;
    }
  }
  return {knn_ok && dominance_ok && neg_ok,
          std::string("k-NN ") + (knn_ok ? "ok" : "mismatch") + ", dominance " +
              (dominance_ok ? "ok" : "violated") + ", negative vertex " + (neg_ok ? "ok" : "wrong")};
}

Outcome structural_identities() {
  const Tensor f = oracle::random({8, 6, 6}, 600, 0.0, 1.0);
  const Tensor m = network::depth_mask(f);
  const bool idem = network::depth_mask(m) == m;
  const bool invariant = network::depth_project(m, 0.03) == network::depth_project(f, 0.03);

  bool block_ok = true;
  for (graph::Aggregation v : {graph::Aggregation::kResEdgeConv, graph::Aggregation::kGraphSage,
                               graph::Aggregation::kGin, graph::Aggregation::kMaxRelative}) {
    graph::GraphBlockConfig cfg;
    cfg.channels = 4;
    cfg.variant = v;
    ParamSet init;
    Rng rng(601);
    graph::init_graph_block(init, "", cfg, rng);
    ParamSet zero;
    for (std::size_t i = 0; i < init.size(); ++i) zero.add(init.name(i), Tensor(init.value(i).shape()));
    Binder bind(zero, nullptr);
    const Tensor x = oracle::random({4, 8, 8}, 602);
    block_ok = block_ok &&
               graph::graph_block(DiffTensor(x), graph::bind_graph_block(bind, "", cfg), cfg).value() == x;
  }

  const Tensor s = oracle::random({6, 3, 3}, 603);
  const std::size_t ext[] = {1, 2, 3};
  const bool split_ok = ops::channel_concat(ops::channel_split(DiffTensor(s), ext)).value() == s;
  return {idem && invariant && block_ok && split_ok,
          std::string("mask idempotent ") + (idem ? "yes" : "no") + ", argmax invariant " +
              (invariant ? "yes" : "no") + ", block identity " + (block_ok ? "yes" : "no") +
              ", split/concat exact " + (split_ok ? "yes" : "no")};
}

Outcome two_stage_contract(const std::vector<training::TrainSample>& data) {
  io::RunConfig c = desk_config();
  c.train.stage1_epochs = 8;
  c.train.stage2_epochs = 8;
  bool ok = true;
  std::string detail;
  for (training::Strategy s : {training::Strategy::kAlbedoFirst, training::Strategy::kDepthFirst}) {
    c.train.strategy = s;
    const bool albedo_first = s == training::Strategy::kAlbedoFirst;
    training::Model model = training::init_model(c.network, c.train.seed);
    std::vector<std::uint8_t> frozen_after_stage1, other_before;
    training::train_two_stage(model, data, c.train, [&](std::size_t stage, const training::Model& m) {
      if (stage != 1) return;
      frozen_after_stage1 = albedo_first ? branch_bytes(m.albedo, "albedo/") : branch_bytes(m.depth, "depth/");
      other_before = albedo_first ? branch_bytes(m.depth, "depth/") : branch_bytes(m.albedo, "albedo/");
    });
    const auto frozen_now = albedo_first ? branch_bytes(model.albedo, "albedo/") : branch_bytes(model.depth, "depth/");
    const auto other_now = albedo_first ? branch_bytes(model.depth, "depth/") : branch_bytes(model.albedo, "albedo/");
    const bool frozen = frozen_now == frozen_after_stage1;
    const bool moved = other_now != other_before;
    ok = ok && frozen && moved;
    detail += std::string(training::strategy_name(s)) + ": frozen branch " +
              (frozen ? "byte-identical" : "CHANGED") + (moved ? "" : ", trained branch did not move") +
              (albedo_first ? "; " : "");
  }
  return {ok, detail};
}

Outcome learnability(const std::vector<training::TrainSample>& data) {
  const io::RunConfig c = desk_config();
  const auto t0 = Clock::now();
  training::Model model = training::init_model(c.network, c.train.seed);
  const training::TrainResult r = training::train_two_stage(model, data, c.train);
  const double dt = seconds_since(t0);
  const double ratio1 = r.stages.at(0).final_loss / r.stages.at(0).initial_loss;
  const double ratio2 = r.stages.at(1).final_loss / r.stages.at(1).initial_loss;
  const Scores s = score(model, data, c.train.strategy);
  return {ratio1 < 0.2 && ratio2 < 0.5 && s.psnr >= 20.0 && dt < 600.0,
          fmt("L_albedo %.4f -> ", r.stages[0].initial_loss) + fmt("%.4f (x%.3f), ", r.stages[0].final_loss, ratio1) +
              fmt("L_depth %.4f -> ", r.stages[1].initial_loss) + fmt("%.4f (x%.3f), ", r.stages[1].final_loss, ratio2) +
              fmt("train PSNR %.2f dB, %.0f s", s.psnr, dt)};
}

Outcome ablations(const std::vector<training::TrainSample>& data) {
  struct Run {
    std::string label;
    std::function<void(io::RunConfig&)> apply;
  };
  std::vector<Run> runs;
  for (graph::Aggregation v : {graph::Aggregation::kResEdgeConv, graph::Aggregation::kGraphSage,
                               graph::Aggregation::kGin, graph::Aggregation::kMaxRelative}) {
    runs.push_back({"variant=" + std::string(graph::aggregation_name(v)),
                    [v](io::RunConfig& c) { c.network.block.variant = v; }});
  }
  for (training::LossType t : {training::LossType::kL1, training::LossType::kMse, training::LossType::kL1Mse}) {
    runs.push_back({"loss=" + std::string(training::loss_type_name(t)),
                    [t](io::RunConfig& c) { c.train.loss_type = t; }});
  }
  for (std::size_t n : {1u, 2u, 3u}) {
    runs.push_back({"scales=" + std::to_string(n), [n](io::RunConfig& c) { c.train.loss_scales = n; }});
  }

  std::printf("  %-22s %9s %9s %9s %9s\n", "ablation", "PSNR", "SSIM", "RMSE", "MAD");
  std::size_t rows = 0;
  for (const Run& run : runs) {
    io::RunConfig c = desk_config();
    c.train.stage1_epochs = 3;
    c.train.stage2_epochs = 2;
    run.apply(c);
    training::Model model = training::init_model(c.network, c.train.seed);
    training::train_two_stage(model, data, c.train);
    const Scores s = score(model, data, c.train.strategy);
    if (!(std::isfinite(s.psnr) && std::isfinite(s.ssim) && std::isfinite(s.rmse) && std::isfinite(s.mad))) {
      continue;
    }
    std::printf("  %-22s %9.4f %9.4f %9.4f %9.4f\n", run.label.c_str(), s.psnr, s.ssim, s.rmse, s.mad);
    ++rows;
  }
  return {rows == runs.size(), std::to_string(rows) + "/" + std::to_string(runs.size()) + " runs emitted rows"};
}

Outcome metrics_sanity() {
  const Tensor x = oracle::random({16, 16}, 700, 0.0, 1.0);
  const double s = training::ssim(x, x), r = training::rmse(x, x);
  const double cap = training::psnr(x, x);
  const double p = training::psnr(Tensor({8, 8}), Tensor({8, 8}, 0.5));
  const bool ok = std::abs(s - 1.0) < 1e-12 && r == 0.0 && cap == training::kPsnrCap &&
                  std::abs(p - 6.02) < 1e-3;
  return {ok, fmt("ssim(x,x) %.12f, psnr(0,0.5) %.4f dB", s, p) + fmt(", cap %.0f dB", cap)};
}

Outcome io_determinism(const fs::path& work) {
  Rng rng(800);
  std::size_t bad = 0;
  for (int i = 0; i < 1000; ++i) {
    ParamSet p;
    Shape shape;
    const std::size_t rank = 1 + rng() % 4;
    for (std::size_t r = 0; r < rank; ++r) shape.push_back(1 + rng() % 6);
    p.add("tensor_" + std::to_string(i), oracle::random(shape, rng(), -1e9, 1e9));
    const std::vector<std::uint8_t> bytes = io::encode(p);
    const ParamSet back = io::decode(bytes);
    if (!(back == p) || io::checksum(io::encode(back)) != io::checksum(bytes)) ++bad;
  }

  const io::RunConfig c = desk_config();
  const auto a = io::generate_dataset(c, work / "det_a", 4, 99);
  const auto b = io::generate_dataset(c, work / "det_b", 4, 99);
  bool same_data = a.size() == b.size();
  for (std::size_t i = 0; same_data && i < a.size(); ++i) {
    same_data = io::read_bytes(a[i]) == io::read_bytes(b[i]);
  }

  io::RunConfig t = c;
  t.train.stage1_epochs = 3;
  t.train.stage2_epochs = 3;
  const std::vector<training::TrainSample> data = io::load_dataset(work / "det_a");
  std::string hist[2];
  for (std::string& h : hist) {
    training::Model m = training::init_model(t.network, t.train.seed);
    h = io::loss_history_csv(training::train_two_stage(m, data, t.train).history);
  }
  const bool same_hist = hist[0] == hist[1];
  return {bad == 0 && same_data && same_hist,
          std::to_string(1000 - bad) + "/1000 containers exact, datasets " +
              (same_data ? "identical" : "DIFFER") + ", loss histories " +
              (same_hist ? "identical" : "DIFFER")};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria for the NLOS reconstruction library"};
  std::string workdir = "acceptance_work";
  app.add_option("--workdir", workdir, "Scratch directory for generated data");
  CLI11_PARSE(app, argc, argv);
  const fs::path work(workdir);
  fs::create_directories(work);

  std::vector<training::TrainSample> corpus;
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"adjoint identity", adjoint_identity},
      {"forward-model oracle", forward_oracle},
      {"gradient suite", gradient_suite},
      {"graph oracles", graph_oracles},
      {"structural identities", structural_identities},
      {"two-stage contract",
       [&] {
         corpus = desk_corpus(work / "corpus");
         return two_stage_contract(corpus);
       }},
      {"desk-scale learnability", [&] { return learnability(corpus); }},
      {"ablation axes", [&] { return ablations(corpus); }},
      {"metrics sanity", metrics_sanity},
      {"io round trip and determinism", [&] { return io_determinism(work); }},
  };

  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::printf("%s criterion %zu (%s): %s\n", o.pass ? "PASS" : "FAIL", i + 1,
                criteria[i].first.c_str(), o.detail.c_str());
    std::fflush(stdout);
    failures += o.pass ? 0 : 1;
  }
  std::printf("%d of %zu criteria failed\n", failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
