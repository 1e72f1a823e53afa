#pragma once

// Joint multi-head attention over the concatenated text, visual and context
// token sequences. Every token queries, and is keyed by, every other token, so
// each modality attends to the other two. A learned tag vector per modality is
// added to its tokens before projection.
//
//   X~ = concat(F_T, F_V, F_C) + tags[modality]
//   Q, K, V = X~ W_Q, X~ W_K, X~ W_V
//   Z_h = softmax(Q_h K_h^T / sqrt(head_dim)) V_h       (per head h)
//   Y = (X~ + Z) W_O,  pooled = mean_rows(Y)

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

#include "cimr/encoders.hpp"
#include "cimr/errors.hpp"
#include "cimr/rng.hpp"

namespace cimr {

inline constexpr int kDefaultHeads = 4;
inline constexpr int kNumModalities = 3;

struct AttentionParams {
  Matrix w_q, w_k, w_v, w_o;  // d x d
  Matrix modality_tags;       // 3 x d, rows indexed by Modality
  int heads = kDefaultHeads;
  std::uint64_t param_seed = 0;

  int dim() const { return static_cast<int>(w_q.rows()); }
  int head_dim() const { return dim() / heads; }
};

/// Uniform in [-1/sqrt(d), 1/sqrt(d)], filled in W_Q, W_K, W_V, W_O, tags order.
inline AttentionParams make_attention_params(std::uint64_t param_seed, int dim = kFeatureDim,
                                             int heads = kDefaultHeads) {
  if (heads <= 0 || dim % heads != 0) {
    throw DomainError(DomainErrc::DimMismatch, "model dimension not divisible by head count");
  }
  AttentionParams p;
  p.heads = heads;
  p.param_seed = param_seed;
  Rng rng(param_seed);
  const double bound = 1.0 / std::sqrt(static_cast<double>(dim));
  auto fill = [&](Matrix& m, Eigen::Index rows) {
    m.resize(rows, dim);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-bound, bound);
  };
  fill(p.w_q, dim);
  fill(p.w_k, dim);
  fill(p.w_v, dim);
  fill(p.w_o, dim);
  fill(p.modality_tags, kNumModalities);
  return p;
}

struct FusionInputs {
  FeatureSeq text;
  FeatureSeq visual;
  FeatureSeq context;

  Eigen::Index total_tokens() const { return text.size() + visual.size() + context.size(); }
};

struct FusedFeatures {
  Matrix vectors;               // one row per input token, in input order
  Vector pooled;                // mean of the rows of `vectors`
  std::vector<Matrix> attention;  // per head, n x n, row-stochastic
};

struct FusionGradients {
  Matrix d_text, d_visual, d_context;
  Matrix d_w_q, d_w_k, d_w_v, d_w_o;
  Matrix d_modality_tags;
};

namespace detail {

struct FusionCache {
  Matrix x;  // tagged input
  Matrix q, k, v, z, m;
  std::vector<Matrix> attention;
  std::vector<int> modality;  // per token
  FusedFeatures out;
};

inline void check_shapes(const FusionInputs& in, const AttentionParams& p) {
  const Eigen::Index d = p.dim();
  if (p.w_q.cols() != d || p.w_k.rows() != d || p.w_k.cols() != d || p.w_v.rows() != d ||
      p.w_v.cols() != d || p.w_o.rows() != d || p.w_o.cols() != d ||
      p.modality_tags.rows() != kNumModalities || p.modality_tags.cols() != d ||
      p.heads <= 0 || d % p.heads != 0) {
    throw DomainError(DomainErrc::DimMismatch, "attention parameter shapes");
  }
  for (const FeatureSeq* f : {&in.text, &in.visual, &in.context}) {
    if (f->vectors.cols() != d) {
      throw DomainError(DomainErrc::DimMismatch,
                        "feature width " + std::to_string(f->vectors.cols()) + " != " +
                            std::to_string(d));
    }
  }
  if (in.total_tokens() == 0) {
    throw DomainError(DomainErrc::EmptyFusionInput, "no tokens in any modality");
  }
}

// Softmax of each row, max-subtracted.
inline Matrix softmax_rows(const Matrix& s) {
  Matrix a(s.rows(), s.cols());
  for (Eigen::Index i = 0; i < s.rows(); ++i) {
    const double mx = s.row(i).maxCoeff();
    a.row(i) = (s.row(i).array() - mx).exp();
    a.row(i) /= a.row(i).sum();
  }
  return a;
}

inline FusionCache fuse_forward(const FusionInputs& in, const AttentionParams& p) {
  check_shapes(in, p);
  const Eigen::Index n = in.total_tokens();
  const int d = p.dim();
  const int dh = p.head_dim();
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  FusionCache c;
  c.x.resize(n, d);
  c.modality.reserve(static_cast<std::size_t>(n));
  Eigen::Index row = 0;
  for (const FeatureSeq* f : {&in.text, &in.visual, &in.context}) {
    const int m = static_cast<int>(f == &in.text ? Modality::text
                                   : f == &in.visual ? Modality::visual
                                                     : Modality::context);
    for (Eigen::Index i = 0; i < f->size(); ++i, ++row) {
      c.x.row(row) = f->vectors.row(i) + p.modality_tags.row(m);
      c.modality.push_back(m);
    }
  }
  c.q = c.x * p.w_q;
  c.k = c.x * p.w_k;
  c.v = c.x * p.w_v;
  c.z.resize(n, d);
  for (int h = 0; h < p.heads; ++h) {
    const Matrix scores = c.q.middleCols(h * dh, dh) * c.k.middleCols(h * dh, dh).transpose() * scale;
    c.attention.push_back(softmax_rows(scores));
    c.z.middleCols(h * dh, dh) = c.attention.back() * c.v.middleCols(h * dh, dh);
  }
  c.m = c.x + c.z;
  c.out.vectors = c.m * p.w_o;
  c.out.pooled = c.out.vectors.colwise().mean();
  c.out.attention = c.attention;
  return c;
}

}  // namespace detail

inline FusedFeatures fuse(const FusionInputs& in, const AttentionParams& params) {
  return detail::fuse_forward(in, params).out;
}

inline FusedFeatures fuse(const FeatureSeq& f_t, const FeatureSeq& f_v, const FeatureSeq& f_c,
                          const AttentionParams& params) {
  return fuse(FusionInputs{f_t, f_v, f_c}, params);
}

/// Gradients of sum(upstream ∘ fuse(in).vectors) with respect to every input
/// token and every parameter matrix.
inline FusionGradients fuse_backward(const FusionInputs& in, const AttentionParams& p,
                                     const Matrix& upstream) {
  const detail::FusionCache c = detail::fuse_forward(in, p);
  const Eigen::Index n = c.x.rows();
  if (upstream.rows() != n || upstream.cols() != p.dim()) {
    throw DomainError(DomainErrc::DimMismatch, "upstream gradient shape");
  }
  const int dh = p.head_dim();
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  FusionGradients g;
  g.d_w_o = c.m.transpose() * upstream;
  const Matrix d_m = upstream * p.w_o.transpose();
  Matrix d_x = d_m;
  const Matrix& d_z = d_m;

  Matrix d_q(n, p.dim()), d_k(n, p.dim()), d_v(n, p.dim());
  for (int h = 0; h < p.heads; ++h) {
    const Matrix& a = c.attention[static_cast<std::size_t>(h)];
    const auto d_zh = d_z.middleCols(h * dh, dh);
    const Matrix d_a = d_zh * c.v.middleCols(h * dh, dh).transpose();
    d_v.middleCols(h * dh, dh) = a.transpose() * d_zh;
    // Softmax Jacobian-vector product, row by row.
    const Eigen::VectorXd row_dot = (d_a.array() * a.array()).rowwise().sum();
    const Matrix d_s = (a.array() * (d_a.colwise() - row_dot).array()).matrix();
    d_q.middleCols(h * dh, dh) = d_s * c.k.middleCols(h * dh, dh) * scale;
    d_k.middleCols(h * dh, dh) = d_s.transpose() * c.q.middleCols(h * dh, dh) * scale;
  }
  g.d_w_q = c.x.transpose() * d_q;
  g.d_w_k = c.x.transpose() * d_k;
  g.d_w_v = c.x.transpose() * d_v;
  d_x += d_q * p.w_q.transpose() + d_k * p.w_k.transpose() + d_v * p.w_v.transpose();

  g.d_modality_tags = Matrix::Zero(kNumModalities, p.dim());
  for (Eigen::Index i = 0; i < n; ++i) g.d_modality_tags.row(c.modality[static_cast<std::size_t>(i)]) += d_x.row(i);
  g.d_text = d_x.topRows(in.text.size());
  g.d_visual = d_x.middleRows(in.text.size(), in.visual.size());
  g.d_context = d_x.bottomRows(in.context.size());
  return g;
}

/// Backward pass for the pooled output: every token row receives upstream / n.
inline FusionGradients fuse_backward_pooled(const FusionInputs& in, const AttentionParams& p,
                                            const Vector& upstream_pooled) {
  const Eigen::Index n = in.total_tokens();
  if (n == 0) throw DomainError(DomainErrc::EmptyFusionInput, "no tokens in any modality");
  if (upstream_pooled.size() != p.dim()) {
    throw DomainError(DomainErrc::DimMismatch, "pooled upstream gradient width");
  }
  Matrix upstream = upstream_pooled.replicate(n, 1) / static_cast<double>(n);
  return fuse_backward(in, p, upstream);
}

// ---------------------------------------------------------------------------
// Finite-difference verification

inline constexpr double kGradCheckStep = 1e-5;
// Denominator floor for the relative error. Central differences at step 1e-5
// carry ~1e-11 absolute roundoff, so entries whose gradient is below the floor
// are judged on absolute error instead.
inline constexpr double kGradCheckFloor = 1e-5;
// Parameter entries sampled per matrix (inputs are checked exhaustively).
inline constexpr int kGradCheckParamSamples = 24;

struct TokenCounts {
  int text = 1;
  int visual = 1;
  int context = 1;
  int total() const { return text + visual + context; }
};

inline double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), kGradCheckFloor});
  return std::abs(analytic - numeric) / denom;
}

/// Builds a random instance from `seed` (inputs and upstream uniform in [-1, 1],
/// parameters from make_attention_params) and returns the largest relative
/// error between fuse_backward and central differences. Every input entry is
/// checked, plus a seeded sample of entries of each parameter matrix.
inline double check_gradients(std::uint64_t seed, TokenCounts counts, double step = kGradCheckStep) {
  Rng rng(derive_seed(seed, 0, 0x6AD1ULL));
  AttentionParams params = make_attention_params(derive_seed(seed, 1, 0x6AD1ULL));
  const int d = params.dim();
  auto random_seq = [&](Modality m, int rows) {
    FeatureSeq f{m, Matrix(rows, d)};
    for (Eigen::Index i = 0; i < f.vectors.size(); ++i) f.vectors.data()[i] = rng.uniform(-1, 1);
    return f;
  };
  FusionInputs in{random_seq(Modality::text, counts.text), random_seq(Modality::visual, counts.visual),
                  random_seq(Modality::context, counts.context)};
  Matrix upstream(in.total_tokens(), d);
  for (Eigen::Index i = 0; i < upstream.size(); ++i) upstream.data()[i] = rng.uniform(-1, 1);

  const FusionGradients g = fuse_backward(in, params, upstream);
  auto loss = [&] { return (fuse(in, params).vectors.array() * upstream.array()).sum(); };

  double worst = 0.0;
  auto probe = [&](double& entry, double analytic) {
    const double saved = entry;
    entry = saved + step;
    const double up = loss();
    entry = saved - step;
    const double down = loss();
    entry = saved;
    worst = std::max(worst, relative_error(analytic, (up - down) / (2.0 * step)));
  };
  auto probe_all = [&](Matrix& value, const Matrix& grad) {
    for (Eigen::Index i = 0; i < value.size(); ++i) probe(value.data()[i], grad.data()[i]);
  };
  auto probe_sampled = [&](Matrix& value, const Matrix& grad) {
    for (int s = 0; s < kGradCheckParamSamples; ++s) {
      const auto i = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(value.size())));
      probe(value.data()[i], grad.data()[i]);
    }
  };
  probe_all(in.text.vectors, g.d_text);
  probe_all(in.visual.vectors, g.d_visual);
  probe_all(in.context.vectors, g.d_context);
  probe_sampled(params.w_q, g.d_w_q);
  probe_sampled(params.w_k, g.d_w_k);
  probe_sampled(params.w_v, g.d_w_v);
  probe_sampled(params.w_o, g.d_w_o);
  probe_all(params.modality_tags, g.d_modality_tags);
  return worst;
}

struct GradCheckSummary {
  int instances = 0;
  double max_relative_error = 0.0;
};

/// Runs check_gradients over `instances` random shapes with 1..max_tokens total
/// tokens (empty modalities allowed).
inline GradCheckSummary gradient_suite(std::uint64_t seed, int instances, int max_tokens = 6) {
  GradCheckSummary s;
  Rng rng(derive_seed(seed, 0, 0x5017EULL));
  for (int i = 0; i < instances; ++i) {
    TokenCounts counts{0, 0, 0};
    const int total = rng.between(1, max_tokens);
    for (int t = 0; t < total; ++t) {
      switch (rng.below(3)) {
        case 0: ++counts.text; break;
        case 1: ++counts.visual; break;
        default: ++counts.context; break;
      }
    }
    s.max_relative_error =
        std::max(s.max_relative_error, check_gradients(derive_seed(seed, static_cast<std::uint64_t>(i)), counts));
    ++s.instances;
  }
  return s;
}

}  // namespace cimr
