#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "wukong/schema.hpp"

namespace wukong {

using json = nlohmann::json;

enum class FmVariant { basic, lowrank, lowrank_attentive };

const char* fm_variant_name(FmVariant v);
FmVariant parse_fm_variant(const std::string& s);

// Component switches for ablation runs: a disabled block contributes zeros.
struct Ablation {
  bool fmb = false;
  bool lcb = false;
  bool residual = false;

  friend bool operator==(const Ablation&, const Ablation&) = default;
};

// Every architecture hyperparameter. The scaling knobs are l, n_F, n_L, k
// and the FMB MLP widths.
struct WukongConfig {
  std::size_t d = 16;  // global embedding dimension
  std::size_t l = 2;   // interaction layers
  std::size_t n_F = 8; // embeddings produced by each FMB
  std::size_t n_L = 8; // embeddings produced by each LCB
  std::size_t k = 8;   // low-rank projection width of the optimized FM
  FmVariant fm_variant = FmVariant::lowrank;
  // Rows of the compressed input feeding the attentive projection; 0 means n_L (or 1 if n_L is 0).
  std::size_t n_A = 0;
  std::vector<std::size_t> attn_mlp{};        // hidden widths, attentive MLP
  std::vector<std::size_t> fmb_mlp{64};       // hidden widths, FMB MLP
  std::vector<std::size_t> head_mlp{64};      // hidden widths, prediction head
  std::vector<std::size_t> dense_mlp{};       // hidden widths, dense-feature encoder
  double ln_eps = 1e-5;
  // Identity activations, no layer norms, no bias adds: the model becomes a
  // polynomial in its input embeddings.
  bool linear_test_mode = false;
  Ablation ablate;
  std::uint64_t seed = 0;
  FeatureSchema schema;

  void validate() const;

  std::size_t n0() const { return schema.num_embeddings(); }
  std::size_t layer_output() const { return n_F + n_L; }
  std::size_t layer_input(std::size_t layer) const { return layer == 0 ? n0() : layer_output(); }
  std::size_t stack_output() const { return l == 0 ? n0() : layer_output(); }
  std::size_t attn_rows() const { return n_A != 0 ? n_A : (n_L != 0 ? n_L : 1); }
  std::size_t largest_fmb_width() const;
};

json schema_to_json(const FeatureSchema& s);
FeatureSchema schema_from_json(const json& j);

json config_to_json(const WukongConfig& c);
// base_dir resolves a relative "schema_path".
WukongConfig config_from_json(const json& j, const std::filesystem::path& base_dir = {});
WukongConfig load_config(const std::filesystem::path& path);
void save_config(const WukongConfig& c, const std::filesystem::path& path);

// FNV-1a of the canonical JSON dump, as 16 lowercase hex digits.
std::string config_digest(const WukongConfig& c);

// Reads a whole file; ConfigError if it cannot be opened.
std::string read_text_file(const std::filesystem::path& path);
json read_json_file(const std::filesystem::path& path);

}  // namespace wukong
