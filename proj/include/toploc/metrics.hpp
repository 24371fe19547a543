#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdlib>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "toploc/domain.hpp"

namespace toploc {

// ---------------------------------------------------------------------------
// Matching primitives

struct match_counts {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  match_counts& operator+=(const match_counts& o) {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    return *this;
  }
};

struct match_result {
  match_counts counts;
  std::vector<std::pair<std::size_t, std::size_t>> matching;  // (pred index, gt index)
};

struct prf {
  double precision = 0;
  double recall = 0;
  double f_score = 0;
};

/// Precision/recall/F from counts. No predictions gives P = 0; no ground
/// truth gives R = 1; both empty gives P = R = 1.
inline prf score(const match_counts& c) {
  const std::size_t n_pred = c.tp + c.fp;
  const std::size_t n_gt = c.tp + c.fn;
  prf s;
  if (n_pred == 0 && n_gt == 0) {
    s.precision = s.recall = 1.0;
  } else {
    s.precision = n_pred == 0 ? 0.0 : double(c.tp) / double(n_pred);
    s.recall = n_gt == 0 ? 1.0 : double(c.tp) / double(n_gt);
  }
  const double sum = s.precision + s.recall;
  s.f_score = sum == 0 ? 0.0 : 2.0 * s.precision * s.recall / sum;
  return s;
}

namespace detail {

struct candidate_edge {
  double key;  // smaller is better
  std::size_t pred;
  std::size_t gt;
};

inline void sort_edges(std::vector<candidate_edge>& edges) {
  std::sort(edges.begin(), edges.end(), [](const candidate_edge& a, const candidate_edge& b) {
    if (a.key != b.key) return a.key < b.key;
    if (a.pred != b.pred) return a.pred < b.pred;
    return a.gt < b.gt;
  });
}

/// One-to-one greedy assignment over sorted edges; stops at the first edge with key > max_key.
inline std::vector<std::pair<std::size_t, std::size_t>> greedy_assign(const std::vector<candidate_edge>& sorted,
                                                                       std::size_t n_pred, std::size_t n_gt,
                                                                       double max_key) {
  std::vector<std::uint8_t> pred_used(n_pred, 0), gt_used(n_gt, 0);
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (const auto& e : sorted) {
    if (e.key > max_key) break;
    if (pred_used[e.pred] || gt_used[e.gt]) continue;
    pred_used[e.pred] = gt_used[e.gt] = 1;
    out.emplace_back(e.pred, e.gt);
  }
  return out;
}

inline double distance(const point& a, const point& b) { return std::hypot(a.x - b.x, a.y - b.y); }

inline std::vector<candidate_edge> distance_edges(std::span<const point> pred, std::span<const point> gt,
                                                  double max_distance) {
  std::vector<candidate_edge> edges;
  for (std::size_t i = 0; i < pred.size(); ++i)
    for (std::size_t j = 0; j < gt.size(); ++j) {
      const double d = distance(pred[i], gt[j]);
      if (d <= max_distance) edges.push_back({d, i, j});
    }
  sort_edges(edges);
  return edges;
}

inline match_counts counts_from(std::size_t tp, std::size_t n_pred, std::size_t n_gt) {
  return {tp, n_pred - tp, n_gt - tp};
}

}  // namespace detail

/// One-to-one greedy matching by ascending Euclidean distance, pairs farther than threshold excluded.
inline match_result greedy_match(std::span<const point> pred, std::span<const point> gt, double threshold) {
  if (!(threshold >= 0)) throw error("greedy_match: threshold must be >= 0");
  const auto edges = detail::distance_edges(pred, gt, threshold);
  match_result r;
  r.matching = detail::greedy_assign(edges, pred.size(), gt.size(), threshold);
  r.counts = detail::counts_from(r.matching.size(), pred.size(), gt.size());
  return r;
}

// ---------------------------------------------------------------------------
// Reports

struct threshold_row {
  double threshold = 0;
  double precision = 0;
  double recall = 0;
  double f_score = 0;
  match_counts counts;
};

struct match_report {
  std::vector<threshold_row> per_threshold;
  double mean_precision = 0;
  double mean_recall = 0;
  double mean_f = 0;
};

/// Prediction and ground-truth points of one image.
struct image_points {
  std::span<const point> pred;
  std::span<const point> gt;
};

namespace detail {

inline match_report summarize(const std::vector<double>& thresholds, const std::vector<match_counts>& counts) {
  match_report rep;
  for (std::size_t k = 0; k < thresholds.size(); ++k) {
    const auto s = score(counts[k]);
    rep.per_threshold.push_back({thresholds[k], s.precision, s.recall, s.f_score, counts[k]});
    rep.mean_precision += s.precision;
    rep.mean_recall += s.recall;
    rep.mean_f += s.f_score;
  }
  if (!thresholds.empty()) {
    const double n = double(thresholds.size());
    rep.mean_precision /= n;
    rep.mean_recall /= n;
    rep.mean_f /= n;
  }
  return rep;
}

}  // namespace detail

/// Greedy matching at integer distance thresholds 1..100, averaged. Counts are
/// summed over images before ratios are taken.
inline match_report qnrf_fscore(std::span<const image_points> images) {
  std::vector<double> thresholds;
  for (int t = 1; t <= 100; ++t) thresholds.push_back(t);
  std::vector<match_counts> counts(thresholds.size());
  for (const auto& im : images) {
    const auto edges = detail::distance_edges(im.pred, im.gt, thresholds.back());
    for (std::size_t k = 0; k < thresholds.size(); ++k) {
      const auto m = detail::greedy_assign(edges, im.pred.size(), im.gt.size(), thresholds[k]);
      counts[k] += detail::counts_from(m.size(), im.pred.size(), im.gt.size());
    }
  }
  return detail::summarize(thresholds, counts);
}

inline match_report qnrf_fscore(std::span<const point> pred, std::span<const point> gt) {
  const image_points im{pred, gt};
  return qnrf_fscore(std::span<const image_points>(&im, 1));
}

struct gaussian_report {
  match_report report;  // mean_precision = mAP, mean_recall = mAR
  double ap50 = 0, ar50 = 0, ap75 = 0, ar75 = 0;

  void fill_fixed_points() {
    for (const auto& row : report.per_threshold) {
      if (row.threshold == 0.5) ap50 = row.precision, ar50 = row.recall;
      if (row.threshold == 0.75) ap75 = row.precision, ar75 = row.recall;
    }
  }
};

/// Acceptance grid 0.50, 0.55, ..., 0.95.
inline std::vector<double> default_response_grid() {
  std::vector<double> t;
  for (int i = 0; i < 10; ++i) t.push_back(double(50 + 5 * i) / 100.0);
  return t;
}

inline double gaussian_response(const point& p, const point& g, double sigma) {
  const double dx = p.x - g.x, dy = p.y - g.y;
  return std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
}

/// Each ground-truth dot carries exp(-d^2 / (2 sigma^2)); predictions are
/// matched one-to-one greedily by response, and a match is a true positive at
/// t when its response is >= t.
inline gaussian_report gaussian_response_eval(std::span<const image_points> images, double sigma,
                                              std::vector<double> thresholds = default_response_grid()) {
  if (!(sigma > 0)) throw error("gaussian_response_eval: sigma must be > 0");
  if (thresholds.empty()) throw error("gaussian_response_eval: empty threshold grid");
  const double t_min = *std::min_element(thresholds.begin(), thresholds.end());
  std::vector<match_counts> counts(thresholds.size());
  for (const auto& im : images) {
    std::vector<detail::candidate_edge> edges;
    for (std::size_t i = 0; i < im.pred.size(); ++i)
      for (std::size_t j = 0; j < im.gt.size(); ++j) {
        const double r = gaussian_response(im.pred[i], im.gt[j], sigma);
        if (r >= t_min) edges.push_back({-r, i, j});
      }
    detail::sort_edges(edges);
    const auto m = detail::greedy_assign(edges, im.pred.size(), im.gt.size(), 0.0);
    std::vector<double> responses;
    for (const auto& [i, j] : m) responses.push_back(gaussian_response(im.pred[i], im.gt[j], sigma));
    for (std::size_t k = 0; k < thresholds.size(); ++k) {
      const auto tp = static_cast<std::size_t>(
          std::count_if(responses.begin(), responses.end(), [&](double r) { return r >= thresholds[k]; }));
      counts[k] += detail::counts_from(tp, im.pred.size(), im.gt.size());
    }
  }
  gaussian_report out;
  out.report = detail::summarize(thresholds, counts);
  out.fill_fixed_points();
  return out;
}

inline gaussian_report gaussian_response_eval(std::span<const point> pred, std::span<const point> gt, double sigma) {
  const image_points im{pred, gt};
  return gaussian_response_eval(std::span<const image_points>(&im, 1), sigma);
}

/// Sums counts threshold by threshold and recomputes every ratio.
inline match_report merge(const match_report& a, const match_report& b) {
  if (a.per_threshold.size() != b.per_threshold.size()) throw error("report merge: threshold grids differ");
  std::vector<double> thresholds;
  std::vector<match_counts> counts;
  for (std::size_t k = 0; k < a.per_threshold.size(); ++k) {
    if (a.per_threshold[k].threshold != b.per_threshold[k].threshold)
      throw error("report merge: threshold grids differ");
    thresholds.push_back(a.per_threshold[k].threshold);
    counts.push_back(a.per_threshold[k].counts);
    counts.back() += b.per_threshold[k].counts;
  }
  return detail::summarize(thresholds, counts);
}

inline gaussian_report merge(const gaussian_report& a, const gaussian_report& b) {
  gaussian_report out;
  out.report = merge(a.report, b.report);
  out.fill_fixed_points();
  return out;
}

// ---------------------------------------------------------------------------
// NWPU adaptive thresholds

struct nwpu_thresholds {
  double sigma_l = 0;  // half diagonal of the head box
  double sigma_s = 0;  // half of the shorter side
};

inline nwpu_thresholds nwpu_sigmas(const box& b) { return {std::hypot(b.w, b.h) / 2.0, std::min(b.w, b.h) / 2.0}; }

inline constexpr std::size_t nwpu_area_buckets = 6;

/// A0..A5 = [1, 10], (10, 100], ..., (1e4, 1e5], > 1e5; areas below 1 land in A0.
inline std::size_t nwpu_area_bucket(double area) {
  double upper = 10.0;
  for (std::size_t k = 0; k + 1 < nwpu_area_buckets; ++k, upper *= 10.0)
    if (area <= upper) return k;
  return nwpu_area_buckets - 1;
}

struct nwpu_side {
  match_counts counts;
  prf scores;
  std::array<std::optional<double>, nwpu_area_buckets> recall_by_area{};  // empty bucket: nullopt
  std::array<std::size_t, nwpu_area_buckets> area_hits{};
  std::array<std::size_t, nwpu_area_buckets> area_totals{};

  void finalize() {
    scores = score(counts);
    for (std::size_t b = 0; b < nwpu_area_buckets; ++b)
      recall_by_area[b] = area_totals[b] ? std::optional<double>(double(area_hits[b]) / double(area_totals[b]))
                                         : std::nullopt;
  }
};

struct nwpu_report {
  nwpu_side large;   // sigma_l
  nwpu_side strict;  // sigma_s
};

/// Image whose ground truth carries head boxes.
struct nwpu_image {
  std::span<const point> pred;
  const dot_annotation* gt = nullptr;
};

inline nwpu_report nwpu_eval(std::span<const nwpu_image> images) {
  nwpu_report rep;
  for (const auto& im : images) {
    if (!im.gt || !im.gt->has_boxes()) throw error("nwpu_eval: ground truth needs head boxes");
    const auto gt = im.gt->points();
    const auto boxes = im.gt->boxes();
    for (int side = 0; side < 2; ++side) {
      std::vector<double> radius(gt.size());
      for (std::size_t j = 0; j < gt.size(); ++j) {
        const auto s = nwpu_sigmas(boxes[j]);
        radius[j] = side == 0 ? s.sigma_l : s.sigma_s;
      }
      std::vector<detail::candidate_edge> edges;
      for (std::size_t i = 0; i < im.pred.size(); ++i)
        for (std::size_t j = 0; j < gt.size(); ++j) {
          const double d = detail::distance(im.pred[i], gt[j]);
          if (d <= radius[j]) edges.push_back({d / radius[j], i, j});
        }
      detail::sort_edges(edges);
      const auto m = detail::greedy_assign(edges, im.pred.size(), gt.size(), 1.0);
      auto& out = side == 0 ? rep.large : rep.strict;
      out.counts += detail::counts_from(m.size(), im.pred.size(), gt.size());
      std::vector<std::uint8_t> matched(gt.size(), 0);
      for (const auto& [i, j] : m) matched[j] = 1;
      for (std::size_t j = 0; j < gt.size(); ++j) {
        const auto b = nwpu_area_bucket(boxes[j].w * boxes[j].h);
        ++out.area_totals[b];
        out.area_hits[b] += matched[j];
      }
    }
  }
  rep.large.finalize();
  rep.strict.finalize();
  return rep;
}

inline nwpu_report merge(const nwpu_report& a, const nwpu_report& b) {
  nwpu_report out = a;
  for (int side = 0; side < 2; ++side) {
    auto& o = side == 0 ? out.large : out.strict;
    const auto& x = side == 0 ? b.large : b.strict;
    o.counts += x.counts;
    for (std::size_t k = 0; k < nwpu_area_buckets; ++k) {
      o.area_hits[k] += x.area_hits[k];
      o.area_totals[k] += x.area_totals[k];
    }
    o.finalize();
  }
  return out;
}

inline nwpu_report nwpu_eval(std::span<const point> pred, const dot_annotation& gt) {
  const nwpu_image im{pred, &gt};
  return nwpu_eval(std::span<const nwpu_image>(&im, 1));
}

// ---------------------------------------------------------------------------
// GAME

struct game_level {
  unsigned level = 0;
  double value = 0;
};

struct game_report {
  std::vector<game_level> per_level;
  std::size_t images = 0;
};

namespace detail {

/// Cell of coordinate v on an axis of length extent split into n equal half-open cells.
inline std::size_t cell_of(double v, double extent, std::size_t n) {
  const auto boundary = [&](std::size_t j) { return double(j) * extent / double(n); };
  double raw = std::floor(v * double(n) / extent);
  std::size_t c = raw <= 0 ? 0 : std::min<std::size_t>(n - 1, static_cast<std::size_t>(raw));
  while (c > 0 && v < boundary(c)) --c;
  while (c + 1 < n && v >= boundary(c + 1)) ++c;
  return c;
}

inline std::vector<long> cell_counts(std::span<const point> pts, shape dims, unsigned level) {
  const std::size_t n = std::size_t{1} << level;
  std::vector<long> counts(n * n, 0);
  for (const auto& p : pts) {
    const auto row = cell_of(p.y, dims.height, n);
    const auto col = cell_of(p.x, dims.width, n);
    ++counts[row * n + col];
  }
  return counts;
}

}  // namespace detail

/// Sum of absolute count errors over the 2^L x 2^L grid, one image.
inline double game_image(std::span<const point> pred, std::span<const point> gt, shape dims, unsigned level) {
  if (dims.height == 0 || dims.width == 0) throw error("game: image dimensions must be positive");
  if (level > 15) throw error("game: level too large");
  const auto a = detail::cell_counts(pred, dims, level);
  const auto b = detail::cell_counts(gt, dims, level);
  double sum = 0;
  for (std::size_t k = 0; k < a.size(); ++k) sum += double(std::labs(a[k] - b[k]));
  return sum;
}

inline game_report game(std::span<const std::vector<point>> preds, std::span<const dot_annotation> gts,
                        std::span<const shape> dims, std::span<const unsigned> levels) {
  if (preds.size() != gts.size() || preds.size() != dims.size())
    throw error("game: misaligned lists (" + std::to_string(preds.size()) + " predictions, " +
                std::to_string(gts.size()) + " annotations, " + std::to_string(dims.size()) + " dims)");
  game_report rep;
  rep.images = preds.size();
  for (const unsigned level : levels) {
    double sum = 0;
    for (std::size_t i = 0; i < preds.size(); ++i) sum += game_image(preds[i], gts[i].points(), dims[i], level);
    rep.per_level.push_back({level, preds.empty() ? 0.0 : sum / double(preds.size())});
  }
  return rep;
}

/// Image-weighted combination of reports built over disjoint image sets.
inline game_report merge(const game_report& a, const game_report& b) {
  if (a.per_level.size() != b.per_level.size()) throw error("game merge: level lists differ");
  game_report out;
  out.images = a.images + b.images;
  for (std::size_t k = 0; k < a.per_level.size(); ++k) {
    if (a.per_level[k].level != b.per_level[k].level) throw error("game merge: level lists differ");
    const double sum = a.per_level[k].value * double(a.images) + b.per_level[k].value * double(b.images);
    out.per_level.push_back({a.per_level[k].level, out.images ? sum / double(out.images) : 0.0});
  }
  return out;
}

struct count_errors {
  double mae = 0;
  double rmse = 0;
};

inline count_errors count_error(std::span<const std::vector<point>> preds, std::span<const dot_annotation> gts) {
  if (preds.size() != gts.size()) throw error("count_error: misaligned lists");
  count_errors e;
  if (preds.empty()) return e;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const double d = double(preds[i].size()) - double(gts[i].size());
    e.mae += std::abs(d);
    e.rmse += d * d;
  }
  e.mae /= double(preds.size());
  e.rmse = std::sqrt(e.rmse / double(preds.size()));
  return e;
}

}  // namespace toploc
