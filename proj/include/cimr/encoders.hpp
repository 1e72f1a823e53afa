#pragma once

// Training-free modality encoders: hashed token embeddings for text and
// context, a fixed linear projection of per-cell symbol vectors for vision.

#include <Eigen/Dense>

#include <cctype>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "cimr/context.hpp"
#include "cimr/map_sim.hpp"
#include "cimr/rng.hpp"

namespace cimr {

inline constexpr int kFeatureDim = 64;
inline constexpr int kVocabSize = 4096;
inline constexpr int kVisualInputDim = 2 * kSymbolDim + 2;  // front ‖ back ‖ row/7 ‖ col/7
inline constexpr std::uint64_t kDefaultEncoderSeed = 42;

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::Matrix<double, 1, Eigen::Dynamic>;

enum class Modality : std::uint8_t { text, visual, context };

/// Token features, one row per token, kFeatureDim columns.
struct FeatureSeq {
  Modality modality = Modality::text;
  Matrix vectors = Matrix(0, kFeatureDim);

  Eigen::Index size() const { return vectors.rows(); }
  friend bool operator==(const FeatureSeq& a, const FeatureSeq& b) {
    return a.modality == b.modality && a.vectors.rows() == b.vectors.rows() &&
           a.vectors.cols() == b.vectors.cols() && a.vectors == b.vectors;
  }
};

struct EncoderParams {
  Matrix embedding_table;
  Matrix visual_projection;
  std::uint64_t param_seed = kDefaultEncoderSeed;
};

/// Entries uniform in [-0.1, 0.1], drawn row-major from Rng(param_seed):
/// embedding table first, then the visual projection.
inline EncoderParams make_encoder_params(std::uint64_t param_seed = kDefaultEncoderSeed) {
  EncoderParams p;
  p.param_seed = param_seed;
  Rng rng(param_seed);
  p.embedding_table.resize(kVocabSize, kFeatureDim);
  for (Eigen::Index i = 0; i < p.embedding_table.size(); ++i) {
    p.embedding_table.data()[i] = rng.uniform(-0.1, 0.1);
  }
  p.visual_projection.resize(kVisualInputDim, kFeatureDim);
  for (Eigen::Index i = 0; i < p.visual_projection.size(); ++i) {
    p.visual_projection.data()[i] = rng.uniform(-0.1, 0.1);
  }
  return p;
}

constexpr std::uint64_t fnv1a64(std::string_view s) noexcept {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

/// Lowercased whitespace tokens.
inline std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string cur;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isspace(c)) {
      if (!cur.empty()) tokens.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(static_cast<char>(std::tolower(c)));
    }
  }
  if (!cur.empty()) tokens.push_back(std::move(cur));
  return tokens;
}

inline int token_row(std::string_view token) {
  return static_cast<int>(fnv1a64(token) % static_cast<std::uint64_t>(kVocabSize));
}

inline FeatureSeq encode_text(std::string_view instruction, const EncoderParams& params,
                              Modality modality = Modality::text) {
  const auto tokens = tokenize(instruction);
  FeatureSeq out{modality, Matrix(static_cast<Eigen::Index>(tokens.size()), kFeatureDim)};
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    out.vectors.row(static_cast<Eigen::Index>(i)) = params.embedding_table.row(token_row(tokens[i]));
  }
  return out;
}

/// One row per non-empty cell in row-major order, then a global row holding
/// their mean (all zero when no cell is occupied).
inline FeatureSeq encode_visual(const Observation& obs, const EncoderParams& params) {
  parse_observation(obs);  // rejects malformed cells

  std::vector<Vector> rows;
  for (int r = 0; r < kGridSize; ++r) {
    for (int c = 0; c < kGridSize; ++c) {
      const auto& slots = obs.cells[r][c];
      if (slots[0][kPresenceIndex] == 0 && slots[1][kPresenceIndex] == 0) continue;
      Vector input(kVisualInputDim);
      for (int k = 0; k < kSymbolDim; ++k) {
        input[k] = slots[0][k];
        input[kSymbolDim + k] = slots[1][k];
      }
      input[2 * kSymbolDim] = r / 7.0;
      input[2 * kSymbolDim + 1] = c / 7.0;
      rows.push_back(input * params.visual_projection);
    }
  }
  FeatureSeq out{Modality::visual, Matrix(static_cast<Eigen::Index>(rows.size()) + 1, kFeatureDim)};
  Vector mean = Vector::Zero(kFeatureDim);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.vectors.row(static_cast<Eigen::Index>(i)) = rows[i];
    mean += rows[i];
  }
  if (!rows.empty()) mean /= static_cast<double>(rows.size());
  out.vectors.row(out.vectors.rows() - 1) = mean;
  return out;
}

inline FeatureSeq encode_context(const ContextState& ctx, const EncoderParams& params) {
  return encode_text(canonical_text(ctx), params, Modality::context);
}

}  // namespace cimr
