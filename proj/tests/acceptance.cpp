// Acceptance gate: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "test_support.hpp"
#include "toploc/toploc.hpp"

using namespace toploc;
namespace fs = std::filesystem;

namespace {

using clock_type = std::chrono::steady_clock;

double seconds_since(clock_type::time_point t0) {
  return std::chrono::duration<double>(clock_type::now() - t0).count();
}

struct outcome {
  bool pass;
  std::string detail;
};

int failures = 0;
std::vector<std::string> only;

void report(const std::string& name, const std::function<outcome()>& fn) {
  if (!only.empty() && std::find(only.begin(), only.end(), name) == only.end()) return;
  const auto t0 = clock_type::now();
  outcome o;
  try {
    o = fn();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  if (!o.pass) ++failures;
  std::printf("%s  %-24s %s [%.1fs]\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str(), seconds_since(t0));
  std::fflush(stdout);
}

template <class... Args>
std::string fmt(const char* f, Args... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

outcome oracle_equivalence() {
  const auto t0 = clock_type::now();
  std::mt19937_64 rng(1001);
  std::uniform_real_distribution<double> u(0, 1);
  std::size_t mismatches = 0, trials = 0;
  for (auto conn : {connectivity::four, connectivity::eight})
    for (int t = 0; t < 1000; ++t) {
      const std::uint32_t h = 1 + rng() % 8, w = 1 + rng() % 8;
      std::vector<double> v(h * w);
      for (auto& x : v) x = t % 2 ? std::floor(u(rng) * 11) / 10 : u(rng);
      const grid_field<double> f(h, w, std::move(v));
      mismatches += compute_persistence(f, conn) != brute_force_persistence(f, conn);
      ++trials;
    }
  const double secs = seconds_since(t0);
  return {mismatches == 0 && secs < 60.0, fmt("%zu/%zu diagrams identical, %.1fs (limit 60s)", trials - mismatches, trials, secs)};
}

outcome gradient_checks() {
  const auto t0 = clock_type::now();
  std::mt19937_64 rng(2002);
  double worst = 0;
  for (int t = 0; t < 200; ++t) {
    const std::uint32_t h = 2 + rng() % 9, w = 2 + rng() % 9;
    double gap = 0;
    const auto f = toploc::testing::distinct_field(rng, h, w, gap);
    const auto ann = dot_annotation(toploc::testing::random_points(rng, rng() % 6, w, h));
    const auto mask = dilate_dots(ann, h, w, 1.5);
    const auto tiles = tile_image(h, w, ann, 1 + rng() % 6, rng());
    loss_config cfg;
    cfg.connectivity = t % 2 ? connectivity::eight : connectivity::four;
    const double step = gap / 4;
    const std::vector<std::pair<std::function<loss_result<double>(const grid_field<double>&)>, const char*>> losses{
        {[&](const grid_field<double>& x) { return dice_loss(mask, x); }, "dice"},
        {[&](const grid_field<double>& x) { return persistence_loss(x, tiles, cfg.connectivity); }, "pers"},
        {[&](const grid_field<double>& x) { return combined_loss(x, mask, tiles, cfg); }, "combined"},
    };
    for (const auto& [fn, name] : losses) {
      const auto r = fn(f);
      for (std::size_t i = 0; i < f.size(); ++i) {
        std::vector<double> up(f.values().begin(), f.values().end()), down = up;
        up[i] += step;
        down[i] -= step;
        const double fd = (fn(grid_field<double>(h, w, up)).value - fn(grid_field<double>(h, w, down)).value) / (2 * step);
        worst = std::max(worst, std::abs(fd - r.gradient[i]));
      }
    }
  }
  const double secs = seconds_since(t0);
  return {worst <= 1e-4 && secs < 120.0, fmt("200 instances x 3 losses, max |fd - grad| = %.2e (tol 1e-4), %.1fs", worst, secs)};
}

struct sweep_result {
  std::size_t exact = 0;
  long abs_error = 0;
  std::vector<std::size_t> counts;
};

sweep_result topology_sweep(double lambda) {
  sweep_result out;
  for (std::size_t s = 0; s < 40; ++s) {
    const std::size_t k = 1 + s % 10;
    const auto sc = synth_scene(64, 64, k, 12, 5000 + s);
    const auto cfg = demo_defaults::loss(9000 + s, lambda);
    optimize_options opt;
    opt.iters = 2000;
    opt.warmup_iters = 200;
    opt.trace_every = 0;
    const auto r = optimize_field(sc.mask, sc.dots, cfg, opt);
    const auto c = r.trace.back().components;
    out.counts.push_back(c);
    out.exact += c == k;
    out.abs_error += std::labs(long(c) - long(k));
  }
  return out;
}

std::string count_list(const sweep_result& r) {
  std::string s;
  for (std::size_t i = 0; i < r.counts.size(); ++i) {
    if (r.counts[i] == 1 + i % 10) continue;
    s += fmt(" s%zu:k=%zu->%zu", i, 1 + i % 10, r.counts[i]);
  }
  return s.empty() ? "" : " misses:" + s;
}

outcome dilation_topology() {
  std::mt19937_64 rng(3003);
  std::size_t ok = 0;
  for (int t = 0; t < 500; ++t) {
    const std::uint32_t h = 16 + rng() % 112, w = 16 + rng() % 112;
    auto pts = toploc::testing::separated_points(rng, 1 + rng() % 60, w, h, 3.0);
    std::optional<std::vector<box>> boxes;
    if (t % 2) {
      std::uniform_real_distribution<double> side(1, 40);
      boxes.emplace();
      for (std::size_t i = 0; i < pts.size(); ++i) boxes->push_back({side(rng), side(rng)});
    }
    const auto n = pts.size();
    const dot_annotation ann(std::move(pts), std::move(boxes));
    ok += count_components(dilate_dots(ann, h, w), connectivity::four) == n;
  }
  return {ok == 500, fmt("%zu/500 masks with one component per dot", ok)};
}

outcome extraction_topology() {
  std::mt19937_64 rng(4004);
  std::size_t ok = 0;
  for (int t = 0; t < 500; ++t) {
    const std::uint32_t h = 1 + rng() % 48, w = 1 + rng() % 48;
    const auto f = toploc::testing::random_field(rng, h, w, t % 2 == 0);
    ok += extract_dot_map(f).components == count_components(superlevel_mask(f, 0.5), connectivity::four);
  }
  return {ok == 500, fmt("%zu/500 fields keep the {f >= 0.5} component count", ok)};
}

outcome metric_fixtures() {
  std::vector<std::string> bad;
  const auto gt = make_annotation({{10, 10}, {40, 25}, {70, 80}}, std::vector<box>{{6, 8}, {12, 12}, {50, 20}});
  const auto pts = gt.points();
  if (qnrf_fscore(pts, pts).mean_f != 1.0) bad.push_back("qnrf F");
  const auto g = gaussian_response_eval(pts, pts, 5);
  if (g.report.mean_precision != 1.0 || g.report.mean_recall != 1.0) bad.push_back("gauss mAP/mAR");
  const std::vector<std::vector<point>> preds{{pts.begin(), pts.end()}};
  const std::vector<dot_annotation> gts{gt};
  const std::vector<shape> dims{{100, 100}};
  const std::vector<unsigned> levels{0, 1, 2, 3};
  for (const auto& l : game(preds, gts, dims, levels).per_level)
    if (l.value != 0.0) bad.push_back("game identity");
  const auto n = nwpu_eval(pts, gt);
  if (n.large.scores.f_score != 1.0 || n.strict.scores.f_score != 1.0) bad.push_back("nwpu F");

  const auto one = make_annotation({{10, 10}}, std::vector<box>{{6, 8}});
  const std::vector<point> at4{{10, 14}};
  const auto s = nwpu_eval(at4, one);
  if (s.large.counts.tp != 1 || s.strict.counts.tp != 0 || s.strict.counts.fn != 1) bad.push_back("nwpu (6,8) box");

  const std::vector<std::vector<point>> p{{{10, 10}}};
  const std::vector<dot_annotation> q{make_annotation({{90, 90}})};
  const auto r = game(p, q, dims, levels);
  if (r.per_level[0].value != 0.0 || r.per_level[1].value != 2.0) bad.push_back("game quadrant");

  std::string detail = "identity F/mAP/mAR/G(L)/NWPU, (6,8)-box at d=4, GAME quadrant";
  for (const auto& b : bad) detail += " [wrong: " + b + "]";
  return {bad.empty(), detail};
}

double time_persistence(std::uint32_t side, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(0, 1);
  std::vector<float> v(std::size_t(side) * side);
  for (auto& x : v) x = u(rng);
  const grid_field<float> f(side, side, std::move(v));
  const auto t0 = clock_type::now();
  const auto d = compute_persistence(f);
  const double secs = seconds_since(t0);
  if (d.size() == 0) std::abort();
  return secs;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return v[v.size() / 2];
}

outcome performance() {
  std::vector<double> big, small;
  for (int k = 0; k < 5; ++k) {
    small.push_back(time_persistence(256, 100 + k));
    big.push_back(time_persistence(1024, 200 + k));
  }
  const double tb = median(big), ts = median(small);
  const double worst = *std::max_element(big.begin(), big.end());
  const double ratio = tb / ts;
  return {worst < 2.0 && ratio <= 24.0,
          fmt("1024^2 median %.3fs (max %.3fs, limit 2s), 256^2 median %.4fs, ratio %.1f (limit 24)", tb, worst, ts,
              ratio)};
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string("\"") + TOPLOC_CLI + "\" " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

outcome io_roundtrip() {
  const fs::path fx = TOPLOC_FIXTURES;
  std::vector<std::string> bad;
  std::size_t round_trips = 0, rejected = 0, malformed = 0;
  toploc::testing::temp_dir dir;
  for (const auto& e : fs::directory_iterator(fx)) {
    if (!e.is_regular_file()) continue;
    const auto ext = e.path().extension();
    const auto raw = io::detail::slurp(e.path().string());
    std::string back;
    if (ext == ".tcf") back = io::encode_field(io::decode_field(raw));
    else if (ext == ".csv") back = io::encode_dots(io::decode_dots(raw));
    else if (ext == ".json") back = io::dump(io::json::parse(raw));
    else continue;
    ++round_trips;
    if (back != raw) bad.push_back(e.path().filename().string());
  }
  // The diagram fixture must also come out of the CLI byte for byte.
  const auto out = dir.file("d.json");
  if (run_cli("persistence --input \"" + (fx / "row5.tcf").string() + "\" --out \"" + out + "\"") != 0 ||
      io::detail::slurp(out) != io::detail::slurp((fx / "row5_diagram.json").string()))
    bad.push_back("cli diagram");
  for (const auto& e : fs::directory_iterator(fx / "malformed")) {
    ++malformed;
    const auto p = "\"" + e.path().string() + "\"";
    const int code = e.path().extension() == ".tcf"
                         ? run_cli("persistence --input " + p + " --out \"" + dir.file("x.json") + "\"")
                         : run_cli("dilate --dots " + p + " --dims 100x100 --out \"" + dir.file("x.tcf") + "\"");
    if (code != 0 && code != -1) ++rejected;
    else bad.push_back("accepted " + e.path().filename().string());
  }
  std::string detail = fmt("%zu fixtures round-trip, %zu/%zu malformed files rejected by the CLI", round_trips, rejected,
                           malformed);
  for (const auto& b : bad) detail += " [" + b + "]";
  return {bad.empty() && malformed > 0, detail};
}

}  // namespace

/// Runs every criterion, or only those named on the command line.
int main(int argc, char** argv) {
  only.assign(argv + 1, argv + argc);
  std::printf("toploc %s acceptance\n", version);
  report("oracle-equivalence", oracle_equivalence);
  report("gradient-checks", gradient_checks);

  std::optional<sweep_result> with_run;
  sweep_result without;
  double secs_with = 0;
  const auto with_persistence = [&]() -> const sweep_result& {
    if (!with_run) {
      const auto t0 = clock_type::now();
      with_run = topology_sweep(1.0);
      secs_with = seconds_since(t0);
    }
    return *with_run;
  };
  report("topology-convergence", [&] {
    const auto& with = with_persistence();
    return outcome{with.exact >= 38 && secs_with < 600.0,
                   fmt("%zu/40 scenes end with k components (need 38), sum|dk| = %ld, %.0fs (limit 600s)", with.exact,
                       with.abs_error, secs_with) +
                       count_list(with)};
  });
  report("ablation-direction", [&] {
    const auto& with = with_persistence();
    without = topology_sweep(0.0);
    return outcome{with.abs_error < without.abs_error,
                   fmt("sum|dk| lambda=1: %ld vs lambda=0: %ld (%zu/40 exact without the persistence term)",
                       with.abs_error, without.abs_error, without.exact)};
  });

  report("dilation-topology", dilation_topology);
  report("extraction-topology", extraction_topology);
  report("metric-fixtures", metric_fixtures);
  report("performance", performance);
  report("io-roundtrip", io_roundtrip);

  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
