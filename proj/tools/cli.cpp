#include "cli.hpp"

#include <algorithm>
#include <cstdint>
#include <functional>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "toploc/toploc.hpp"

namespace toploc::cli {
namespace {

struct usage_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

shape parse_dims(const std::string& s) {
  const auto x = s.find_first_of("xX");
  try {
    if (x == std::string::npos) throw std::invalid_argument(s);
    std::size_t p1 = 0, p2 = 0;
    const auto h = std::stoul(s.substr(0, x), &p1);
    const auto w = std::stoul(s.substr(x + 1), &p2);
    if (p1 != x || p2 != s.size() - x - 1 || h == 0 || w == 0 || h > UINT32_MAX || w > UINT32_MAX)
      throw std::invalid_argument(s);
    return {static_cast<std::uint32_t>(h), static_cast<std::uint32_t>(w)};
  } catch (const std::logic_error&) {
    throw usage_error("--dims expects HxW with positive integers, got '" + s + "'");
  }
}

essential_death parse_essential(const std::string& s) {
  return s == "zero" ? essential_death::zero : essential_death::field_min;
}

const char* essential_name(essential_death e) { return e == essential_death::zero ? "zero" : "min"; }

connectivity parse_conn(int k) {
  if (k != 4 && k != 8) throw usage_error("--connectivity must be 4 or 8");
  return connectivity_from_int(k);
}

/// Config validation failures come from flag values, so they are usage errors.
template <class Config>
void check_flags(const Config& cfg) {
  try {
    cfg.validate();
  } catch (const error& e) {
    throw usage_error(e.what());
  }
}

/// Splits [0, n) into contiguous chunks, runs fn per chunk on its own thread, merges in chunk order.
template <class Report, class Fn>
Report run_chunked(std::size_t n, unsigned threads, Fn fn) {
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
  if (threads == 1) return fn(0, n);
  std::vector<std::optional<Report>> parts(threads);
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> failures(threads);
  const std::size_t per = (n + threads - 1) / threads;
  for (unsigned t = 0; t < threads; ++t)
    pool.emplace_back([&, t] {
      try {
        const std::size_t lo = std::min(n, t * per);
        parts[t] = fn(lo, std::min(n, lo + per));
      } catch (...) {
        failures[t] = std::current_exception();
      }
    });
  for (auto& th : pool) th.join();
  for (const auto& f : failures)
    if (f) std::rethrow_exception(f);
  Report out = *parts[0];
  for (unsigned t = 1; t < threads; ++t) out = merge(out, *parts[t]);
  return out;
}

struct eval_args {
  std::vector<std::string> pred;
  std::vector<std::string> gt;
  std::vector<std::string> dims;
  std::vector<unsigned> levels{0, 1, 2, 3};
  double sigma = 5.0;
  std::string out;
  unsigned threads = 1;
};

void add_eval_options(CLI::App* sub, eval_args& a, bool needs_dims, bool needs_sigma) {
  sub->add_option("--pred", a.pred, "Predicted centers CSV (x,y); repeat once per image")->required();
  sub->add_option("--gt", a.gt, "Ground-truth dots CSV; repeat once per image, same order as --pred")->required();
  if (needs_dims) {
    sub->add_option("--dims", a.dims, "Image size HxW; one per image, or one shared by all")->required();
    sub->add_option("--levels", a.levels, "GAME levels")->capture_default_str()->delimiter(',');
  }
  if (needs_sigma) sub->add_option("--sigma", a.sigma, "Gaussian response width in pixels")->capture_default_str();
  sub->add_option("--out", a.out, "Report JSON path")->required();
  sub->add_option("--threads", a.threads, "Worker threads (output does not depend on it)")->capture_default_str();
}

struct loaded_images {
  std::vector<std::vector<point>> pred;
  std::vector<dot_annotation> gt;
  std::vector<shape> dims;
};

loaded_images load_images(const eval_args& a, bool needs_dims) {
  if (a.pred.size() != a.gt.size())
    throw usage_error("--pred given " + std::to_string(a.pred.size()) + " times but --gt " +
                      std::to_string(a.gt.size()) + " times");
  loaded_images im;
  for (std::size_t i = 0; i < a.pred.size(); ++i) {
    const auto p = io::read_dots(a.pred[i]);
    im.pred.emplace_back(p.points().begin(), p.points().end());
    im.gt.push_back(io::read_dots(a.gt[i]));
  }
  if (needs_dims) {
    if (a.dims.size() != 1 && a.dims.size() != a.pred.size())
      throw usage_error("--dims must be given once or once per image");
    for (std::size_t i = 0; i < a.pred.size(); ++i) im.dims.push_back(parse_dims(a.dims[a.dims.size() == 1 ? 0 : i]));
    for (std::size_t i = 0; i < a.pred.size(); ++i) im.gt[i].require_inside(im.dims[i].height, im.dims[i].width);
  }
  return im;
}

std::vector<image_points> point_views(const loaded_images& im, std::size_t lo, std::size_t hi) {
  std::vector<image_points> v;
  for (std::size_t i = lo; i < hi; ++i) v.push_back({im.pred[i], im.gt[i].points()});
  return v;
}

}  // namespace

int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Topological crowd localization: persistence, losses, dot maps and metrics", "toploc"};
  app.require_subcommand(1);

  // persistence
  std::string p_input, p_out;
  int p_conn = 4;
  auto* persistence = app.add_subcommand("persistence", "Superlevel-set 0-dim persistence diagram of a field");
  persistence->add_option("--input", p_input, "Field (TCF)")->required();
  persistence->add_option("--connectivity", p_conn, "Pixel adjacency, 4 or 8")->capture_default_str();
  persistence->add_option("--out", p_out, "Diagram JSON path")->required();

  // loss
  std::string l_pred, l_dots, l_mask, l_grad;
  std::uint32_t l_patch = 50;
  double l_lambda = 1.0;
  std::uint64_t l_seed = 0;
  int l_conn = 4;
  double l_radius = 7.0;
  std::string l_essential = "min";
  auto* loss = app.add_subcommand("loss", "DICE + lambda * persistence loss and its gradient");
  loss->add_option("--pred", l_pred, "Likelihood field (TCF), values in [0, 1]")->required();
  loss->add_option("--dots", l_dots, "Ground-truth dots CSV")->required();
  loss->add_option("--mask", l_mask, "Ground-truth mask (TCF); default: dilate --dots");
  loss->add_option("--patch", l_patch, "Tile size in pixels")->capture_default_str();
  loss->add_option("--lambda", l_lambda, "Persistence loss weight")->capture_default_str();
  loss->add_option("--seed", l_seed, "Seed for the tile grid offset")->capture_default_str();
  loss->add_option("--connectivity", l_conn, "Pixel adjacency, 4 or 8")->capture_default_str();
  loss->add_option("--essential-death", l_essential, "Essential component dies at the tile minimum (min) or at 0 (zero)")
      ->check(CLI::IsMember({"min", "zero"}))
      ->capture_default_str();
  loss->add_option("--radius", l_radius, "Dilation radius when --mask is absent")->capture_default_str();
  loss->add_option("--grad", l_grad, "Write dL/df here (TCF)");

  // extract
  std::string e_pred, e_out, e_mask;
  double e_high = 0.5, e_low = 0.4;
  int e_conn = 4;
  auto* extract = app.add_subcommand("extract", "Double-threshold topological dot map and component centers");
  extract->add_option("--pred", e_pred, "Likelihood field (TCF), values in [0, 1]")->required();
  extract->add_option("--high", e_high, "Seed threshold")->capture_default_str();
  extract->add_option("--low", e_low, "Growth threshold")->capture_default_str();
  extract->add_option("--connectivity", e_conn, "Pixel adjacency, 4 or 8")->capture_default_str();
  extract->add_option("--out", e_out, "Centers CSV path")->required();
  extract->add_option("--mask", e_mask, "Write the dot map here (TCF)");

  // eval
  auto* eval = app.add_subcommand("eval", "Localization metrics");
  eval->require_subcommand(1);
  eval_args g_args, q_args, s_args, n_args;
  auto* ev_game = eval->add_subcommand("game", "Grid average mean absolute error G(L)");
  add_eval_options(ev_game, g_args, true, false);
  auto* ev_qnrf = eval->add_subcommand("qnrf", "Greedy matching F-score averaged over thresholds 1..100 px");
  add_eval_options(ev_qnrf, q_args, false, false);
  auto* ev_gauss = eval->add_subcommand("gauss", "Gaussian-response mAP / mAR over t = 0.50..0.95");
  add_eval_options(ev_gauss, s_args, false, true);
  auto* ev_nwpu = eval->add_subcommand("nwpu", "Box-adaptive F-score at sigma_l and sigma_s");
  add_eval_options(ev_nwpu, n_args, false, false);

  // dilate
  std::string d_dots, d_dims, d_out;
  double d_radius = 7.0;
  auto* dilate = app.add_subcommand("dilate", "Dilate dots into the ground-truth mask");
  dilate->add_option("--dots", d_dots, "Dots CSV (boxes optional)")->required();
  dilate->add_option("--dims", d_dims, "Image size HxW")->required();
  dilate->add_option("--radius", d_radius, "Default disk radius")->capture_default_str();
  dilate->add_option("--out", d_out, "Mask path (TCF)")->required();

  // demo
  std::uint32_t m_size = 64, m_patch = demo_defaults::patch_size;
  std::size_t m_dots = 5, m_iters = demo_defaults::iters, m_warmup = demo_defaults::warmup_iters;
  int m_conn = int(demo_defaults::loss_connectivity);
  double m_step = demo_defaults::step, m_lambda = 1.0, m_min_sep = 12.0;
  std::uint64_t m_seed = 0;
  std::string m_prefix, m_essential = essential_name(demo_defaults::essential);
  auto* demo = app.add_subcommand("demo", "Optimize a raw field under the combined loss on a synthetic scene");
  demo->add_option("--size", m_size, "Square image side")->capture_default_str();
  demo->add_option("--dots", m_dots, "Number of dots")->capture_default_str();
  demo->add_option("--iters", m_iters, "Gradient steps")->capture_default_str();
  demo->add_option("--step", m_step, "Step size")->capture_default_str();
  demo->add_option("--warmup", m_warmup, "DICE-only iterations before the persistence term")->capture_default_str();
  demo->add_option("--lambda", m_lambda, "Persistence loss weight after warmup")->capture_default_str();
  demo->add_option("--patch", m_patch, "Tile size in pixels")->capture_default_str();
  demo->add_option("--connectivity", m_conn, "Pixel adjacency of the persistence term, 4 or 8")->capture_default_str();
  demo->add_option("--essential-death", m_essential, "Essential component dies at the tile minimum (min) or at 0 (zero)")
      ->check(CLI::IsMember({"min", "zero"}))
      ->capture_default_str();
  demo->add_option("--min-sep", m_min_sep, "Minimum dot separation")->capture_default_str();
  demo->add_option("--seed", m_seed, "Seed for scene, initial field and tiles")->capture_default_str();
  demo->add_option("--out-prefix", m_prefix, "Writes PREFIX_trace.csv, PREFIX_final.tcf, PREFIX_gt.tcf, PREFIX_dots.csv")
      ->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*persistence) {
      const auto f = io::read_field(p_input);
      io::write_report(io::to_json(compute_persistence(f, parse_conn(p_conn))), p_out);
    } else if (*loss) {
      const auto conn = parse_conn(l_conn);
      const auto f = io::read_field(l_pred);
      const auto dots = io::read_dots(l_dots);
      const auto mask = l_mask.empty() ? dilate_dots(dots, f.height(), f.width(), l_radius) : io::read_mask(l_mask);
      if (mask.dims() != f.dims())
        throw error("shape mismatch: prediction " + f.dims().str() + " vs mask " + mask.dims().str());
      dots.require_inside(f.height(), f.width());
      const loss_config cfg{l_lambda, l_patch, conn, l_seed, parse_essential(l_essential)};
      check_flags(cfg);
      const auto tiles = tile_image(f.height(), f.width(), dots, l_patch, l_seed);
      const auto r = combined_loss(f, mask, tiles, cfg);
      out << io::detail::format_real(r.value) << "\n";
      if (!l_grad.empty()) io::write_field(r.gradient, l_grad);
    } else if (*extract) {
      const auto f = io::read_field(e_pred);
      const extraction_config cfg{e_high, e_low, parse_conn(e_conn)};
      check_flags(cfg);
      const auto r = extract_dot_map(f, cfg);
      io::write_centers(r.centers, e_out);
      if (!e_mask.empty()) io::write_mask(r.mask, e_mask);
    } else if (*eval) {
      if (*ev_game) {
        const auto im = load_images(g_args, true);
        const auto rep = run_chunked<game_report>(im.pred.size(), g_args.threads, [&](std::size_t lo, std::size_t hi) {
          return game(std::span(im.pred).subspan(lo, hi - lo), std::span(im.gt).subspan(lo, hi - lo),
                      std::span(im.dims).subspan(lo, hi - lo), g_args.levels);
        });
        io::write_report(io::to_json(rep), g_args.out);
      } else if (*ev_qnrf) {
        const auto im = load_images(q_args, false);
        const auto rep = run_chunked<match_report>(im.pred.size(), q_args.threads, [&](std::size_t lo, std::size_t hi) {
          const auto v = point_views(im, lo, hi);
          return qnrf_fscore(v);
        });
        io::write_report(io::to_json(rep), q_args.out);
      } else if (*ev_gauss) {
        const auto im = load_images(s_args, false);
        if (!(s_args.sigma > 0)) throw usage_error("--sigma must be > 0");
        const auto rep =
            run_chunked<gaussian_report>(im.pred.size(), s_args.threads, [&](std::size_t lo, std::size_t hi) {
              const auto v = point_views(im, lo, hi);
              return gaussian_response_eval(v, s_args.sigma);
            });
        io::write_report(io::to_json(rep), s_args.out);
      } else if (*ev_nwpu) {
        const auto im = load_images(n_args, false);
        const auto rep = run_chunked<nwpu_report>(im.pred.size(), n_args.threads, [&](std::size_t lo, std::size_t hi) {
          std::vector<nwpu_image> v;
          for (std::size_t i = lo; i < hi; ++i) v.push_back({im.pred[i], &im.gt[i]});
          return nwpu_eval(v);
        });
        io::write_report(io::to_json(rep), n_args.out);
      }
    } else if (*dilate) {
      const auto dims = parse_dims(d_dims);
      io::write_mask(dilate_dots(io::read_dots(d_dots), dims.height, dims.width, d_radius), d_out);
    } else if (*demo) {
      const auto sc = synth_scene(m_size, m_size, m_dots, m_min_sep, m_seed);
      const loss_config cfg{m_lambda, m_patch, parse_conn(m_conn), m_seed, parse_essential(m_essential)};
      optimize_options opt;
      opt.iters = m_iters;
      opt.step = m_step;
      opt.warmup_iters = m_warmup;
      const auto r = optimize_field(sc.mask, sc.dots, cfg, opt);
      io::write_trace(r.trace, m_prefix + "_trace.csv");
      io::write_field(r.final_field.cast<float>(), m_prefix + "_final.tcf");
      io::write_mask(sc.mask, m_prefix + "_gt.tcf");
      io::write_dots(sc.dots, m_prefix + "_dots.csv");
      out << "dots " << m_dots << " final components " << r.trace.back().components << "\n";
    }
  } catch (const usage_error& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace toploc::cli
