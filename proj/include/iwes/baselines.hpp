#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "iwes/data.hpp"
#include "iwes/errors.hpp"
#include "iwes/model.hpp"
#include "iwes/rng.hpp"
#include "iwes/scoring.hpp"

namespace iwes {

enum class UncertaintyScore { kMargin, kEntropy, kLeastConfident };

inline UncertaintyScore parse_uncertainty_score(const std::string& s) {
  if (s == "margin") return UncertaintyScore::kMargin;
  if (s == "entropy") return UncertaintyScore::kEntropy;
  if (s == "least_confident") return UncertaintyScore::kLeastConfident;
  throw InvalidInputError("unknown uncertainty score: " + s);
}

namespace detail {

inline std::vector<std::size_t> require_active(const Pool& pool, std::size_t k, const char* who) {
  auto active = pool.active_indices();
  if (active.size() < k)
    throw InvalidInputError(std::string(who) + ": requested " + std::to_string(k) +
                            " examples but only " + std::to_string(active.size()) + " remain");
  return active;
}

inline double squared_distance(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) {
    const double d = a[j] - b[j];
    s += d * d;
  }
  return s;
}

}  // namespace detail

// k active indices uniformly without replacement.
inline std::vector<std::size_t> select_random(const Pool& pool, std::size_t k, RngStream& rng) {
  const auto active = detail::require_active(pool, k, "select_random");
  const auto pos = rng.sample_without_replacement(active.size(), k);
  std::vector<std::size_t> out;
  out.reserve(k);
  for (std::size_t p : pos) out.push_back(active[p]);
  return out;
}

// The k highest-uncertainty active examples under the chosen score,
// ties toward the lower pool index. Deterministic.
inline std::vector<std::size_t> select_topk_uncertainty(const Pool& pool,
                                                        const ProbabilisticClassifier& model,
                                                        std::size_t k, UncertaintyScore score) {
  const auto active = detail::require_active(pool, k, "select_topk_uncertainty");
  std::vector<std::pair<double, std::size_t>> scored;
  scored.reserve(active.size());
  for (std::size_t i : active) {
    const auto p = model.predict_proba(pool[i].features);
    double s = 0.0;
    switch (score) {
      case UncertaintyScore::kMargin: s = margin_score(p); break;
      case UncertaintyScore::kEntropy: s = entropy_score(p); break;
      case UncertaintyScore::kLeastConfident: s = least_confident_score(p); break;
    }
    scored.emplace_back(s, i);
  }
  std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
    return a.first > b.first || (a.first == b.first && a.second < b.second);
  });
  std::vector<std::size_t> out;
  out.reserve(k);
  for (std::size_t j = 0; j < k; ++j) out.push_back(scored[j].second);
  return out;
}

// Greedy 2-approximate k-center on the embedding space: repeatedly take the
// active point farthest from its nearest center. Centers start as the
// already-selected set; when that is empty the first of the k picks is a
// uniform-random active point. Ties toward the lower pool index.
inline std::vector<std::size_t> select_coreset_kcenter(const Pool& pool,
                                                       const EmbeddingExtractor& extractor,
                                                       std::size_t k,
                                                       const std::vector<std::size_t>& already_selected,
                                                       RngStream& rng) {
  const auto active = detail::require_active(pool, k, "select_coreset_kcenter");
  if (k == 0) return {};
  std::vector<std::vector<double>> emb;
  emb.reserve(active.size());
  for (std::size_t i : active) emb.push_back(extractor.embed(pool[i].features));

  std::vector<double> min_sq(active.size(), std::numeric_limits<double>::infinity());
  auto absorb_center = [&](const std::vector<double>& center) {
    for (std::size_t a = 0; a < active.size(); ++a)
      min_sq[a] = std::min(min_sq[a], detail::squared_distance(emb[a], center));
  };
  for (std::size_t i : already_selected) absorb_center(extractor.embed(pool[i].features));
  // prior selections are centers, never candidates, even if still active
  std::size_t candidates = active.size();
  for (std::size_t a = 0; a < active.size(); ++a)
    if (std::find(already_selected.begin(), already_selected.end(), active[a]) !=
        already_selected.end()) {
      min_sq[a] = -1.0;
      --candidates;
    }
  if (candidates < k)
    throw InvalidInputError("select_coreset_kcenter: fewer unselected candidates than k");

  std::vector<std::size_t> out;
  out.reserve(k);
  std::size_t start = 0;
  if (already_selected.empty()) {
    const std::size_t first = static_cast<std::size_t>(rng.uniform_int(active.size()));
    out.push_back(active[first]);
    min_sq[first] = -1.0;  // mark picked
    absorb_center(emb[first]);
    start = 1;
  }
  for (std::size_t pick = start; pick < k; ++pick) {
    std::size_t best = active.size();
    double best_d = -std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a < active.size(); ++a) {
      if (min_sq[a] < 0.0) continue;  // already picked this round
      if (min_sq[a] > best_d) {
        best_d = min_sq[a];
        best = a;
      }
    }
    if (best == active.size()) throw InternalError("select_coreset_kcenter: no candidate left");
    out.push_back(active[best]);
    min_sq[best] = -1.0;
    absorb_center(emb[best]);
  }
  return out;
}

// Cross-entropy gradient of the final linear layer under the model's own
// most-likely label: flat (p - onehot(argmax p))  (outer)  phi, class-major.
inline std::vector<double> badge_gradient_embedding(std::span<const double> p,
                                                    std::span<const double> phi) {
  check_probability_vector(p);
  const int yhat = argmax_class(p);
  std::vector<double> g(p.size() * phi.size());
  for (std::size_t c = 0; c < p.size(); ++c) {
    const double coef = p[c] - (static_cast<int>(c) == yhat ? 1.0 : 0.0);
    for (std::size_t j = 0; j < phi.size(); ++j) g[c * phi.size() + j] = coef * phi[j];
  }
  return g;
}

// One k-means++ conditional draw: index sampled with probability
// proportional to min_sq_dist, skipping picked entries; a zero total falls
// back to uniform over the unpicked. Exposed separately so the conditional
// distribution can be tested directly.
inline std::size_t kmeanspp_next(const std::vector<double>& min_sq_dist,
                                 const std::vector<char>& picked, RngStream& rng,
                                 bool* used_uniform_fallback = nullptr) {
  if (min_sq_dist.size() != picked.size())
    throw InvalidInputError("kmeanspp_next: size mismatch");
  double total = 0.0;
  std::size_t unpicked = 0;
  for (std::size_t i = 0; i < min_sq_dist.size(); ++i) {
    if (picked[i]) continue;
    if (!(min_sq_dist[i] >= 0.0)) throw InvalidInputError("kmeanspp_next: negative distance");
    total += min_sq_dist[i];
    ++unpicked;
  }
  if (unpicked == 0) throw InvalidInputError("kmeanspp_next: everything already picked");
  if (total > 0.0) {
    if (used_uniform_fallback) *used_uniform_fallback = false;
    const double u = rng.uniform01() * total;
    double cum = 0.0;
    std::size_t last = 0;
    for (std::size_t i = 0; i < min_sq_dist.size(); ++i) {
      if (picked[i]) continue;
      cum += min_sq_dist[i];
      last = i;
      if (u < cum) return i;
    }
    return last;  // u == total edge from rounding
  }
  if (used_uniform_fallback) *used_uniform_fallback = true;
  std::size_t target = static_cast<std::size_t>(rng.uniform_int(unpicked));
  for (std::size_t i = 0; i < picked.size(); ++i) {
    if (picked[i]) continue;
    if (target == 0) return i;
    --target;
  }
  throw InternalError("kmeanspp_next: fallback walked off the end");
}

namespace detail {

// k-means++ seeding over precomputed embeddings; returns positions into emb.
inline std::vector<std::size_t> kmeanspp_seed(const std::vector<std::vector<double>>& emb,
                                              std::size_t k, RngStream& rng,
                                              bool* used_uniform_fallback) {
  std::vector<std::size_t> out;
  if (k == 0) return out;
  std::vector<char> picked(emb.size(), 0);
  std::vector<double> min_sq(emb.size(), std::numeric_limits<double>::infinity());
  const std::size_t first = static_cast<std::size_t>(rng.uniform_int(emb.size()));
  out.push_back(first);
  picked[first] = 1;
  for (std::size_t i = 0; i < emb.size(); ++i)
    min_sq[i] = squared_distance(emb[i], emb[first]);
  while (out.size() < k) {
    bool fb = false;
    const std::size_t next = kmeanspp_next(min_sq, picked, rng, &fb);
    if (fb && used_uniform_fallback) *used_uniform_fallback = true;
    out.push_back(next);
    picked[next] = 1;
    for (std::size_t i = 0; i < emb.size(); ++i)
      min_sq[i] = std::min(min_sq[i], squared_distance(emb[i], emb[next]));
  }
  return out;
}

}  // namespace detail

// BADGE: k-means++ seeding over the gradient embeddings of the active pool.
// partitions > 1 splits the active pool uniformly at random and seeds
// k/partitions per shard (remainder spread over the first shards).
// used_uniform_fallback, when given, reports whether any draw degenerated to
// the uniform fallback (all remaining gradients identical).
inline std::vector<std::size_t> select_badge(const Pool& pool, const ProbabilisticClassifier& model,
                                             const EmbeddingExtractor& extractor, std::size_t k,
                                             RngStream& rng, std::size_t partitions = 1,
                                             bool* used_uniform_fallback = nullptr) {
  if (partitions < 1) throw InvalidInputError("select_badge: partitions must be positive");
  const auto active = detail::require_active(pool, k, "select_badge");
  if (used_uniform_fallback) *used_uniform_fallback = false;
  if (k == 0) return {};

  std::vector<std::vector<double>> grads;
  grads.reserve(active.size());
  for (std::size_t i : active) {
    const auto p = model.predict_proba(pool[i].features);
    const auto phi = extractor.embed(pool[i].features);
    grads.push_back(badge_gradient_embedding(p, phi));
  }

  std::vector<std::size_t> order(active.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  if (partitions > 1) rng.shuffle(order);

  const std::size_t shards = std::min<std::size_t>(partitions, active.size());
  std::vector<std::size_t> out;
  out.reserve(k);
  std::size_t consumed = 0;
  for (std::size_t s = 0; s < shards; ++s) {
    const std::size_t shard_size = active.size() / shards + (s < active.size() % shards ? 1 : 0);
    const std::size_t quota = k / shards + (s < k % shards ? 1 : 0);
    if (quota > shard_size)
      throw InvalidInputError("select_badge: a partition is smaller than its quota");
    if (quota > 0) {
      std::vector<std::vector<double>> shard_emb;
      shard_emb.reserve(shard_size);
      for (std::size_t j = 0; j < shard_size; ++j) shard_emb.push_back(grads[order[consumed + j]]);
      const auto picks = detail::kmeanspp_seed(shard_emb, quota, rng, used_uniform_fallback);
      for (std::size_t p : picks) out.push_back(active[order[consumed + p]]);
    }
    consumed += shard_size;
  }
  return out;
}

}  // namespace iwes
