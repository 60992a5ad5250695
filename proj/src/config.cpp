#include "wukong/config.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "wukong/errors.hpp"
#include "wukong/hash.hpp"

namespace wukong {

const char* fm_variant_name(FmVariant v) {
  switch (v) {
    case FmVariant::basic: return "basic";
    case FmVariant::lowrank: return "lowrank";
    case FmVariant::lowrank_attentive: return "lowrank_attentive";
  }
  return "?";
}

FmVariant parse_fm_variant(const std::string& s) {
  if (s == "basic") return FmVariant::basic;
  if (s == "lowrank") return FmVariant::lowrank;
  if (s == "lowrank_attentive") return FmVariant::lowrank_attentive;
  throw ConfigError("unknown fm_variant '" + s + "' (expected basic, lowrank, lowrank_attentive)");
}

std::size_t WukongConfig::largest_fmb_width() const {
  std::size_t h = n_F * d;
  for (std::size_t w : fmb_mlp) h = std::max(h, w);
  return h;
}

void WukongConfig::validate() const {
  if (d < 1) throw ConfigError("config: d must be >= 1");
  if (l >= 1 && n_F < 1) throw ConfigError("config: n_F must be >= 1");
  if (k < 1) throw ConfigError("config: k must be >= 1");
  if (!(ln_eps > 0.0)) throw ConfigError("config: ln_eps must be positive");
  const auto check_widths = [](const char* what, const std::vector<std::size_t>& ws) {
    for (std::size_t w : ws) {
      if (w < 1) throw ConfigError(std::string("config: ") + what + " widths must be >= 1");
    }
  };
  check_widths("fmb_mlp", fmb_mlp);
  check_widths("head_mlp", head_mlp);
  check_widths("dense_mlp", dense_mlp);
  check_widths("attn_mlp", attn_mlp);
  schema.validate(d);
}

namespace {

template <typename V>
V get_or(const json& j, const char* key, V fallback) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return fallback;
  try {
    return it->get<V>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: field '") + key + "': " + e.what());
  }
}

void reject_unknown(const json& j, const std::set<std::string>& known, const char* where) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!known.count(it.key())) {
      throw ConfigError(std::string(where) + ": unknown field '" + it.key() + "'");
    }
  }
}

}  // namespace

json schema_to_json(const FeatureSchema& s) {
  json cats = json::array();
  for (const auto& f : s.categorical_features) {
    json c = {{"name", f.name},
              {"cardinality", f.cardinality},
              {"importance", f.importance == Importance::major ? "major" : "minor"},
              {"hotness", f.hotness}};
    if (f.importance == Importance::major) {
      c["num_embeddings"] = f.num_embeddings;
    } else {
      c["underlying_dim"] = f.underlying_dim;
    }
    cats.push_back(std::move(c));
  }
  return json{{"dense", s.dense_features},
              {"categorical", cats},
              {"n_minor_out", s.n_minor_out},
              {"minor_hidden", s.minor_hidden},
              {"m_dense", s.m_dense}};
}

FeatureSchema schema_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("schema: expected an object");
  reject_unknown(j, {"dense", "categorical", "n_minor_out", "minor_hidden", "m_dense"}, "schema");
  FeatureSchema s;
  s.dense_features = get_or<std::vector<std::string>>(j, "dense", {});
  s.n_minor_out = get_or<std::size_t>(j, "n_minor_out", 1);
  s.minor_hidden = get_or<std::size_t>(j, "minor_hidden", 64);
  s.m_dense = get_or<std::size_t>(j, "m_dense", 1);
  if (auto it = j.find("categorical"); it != j.end()) {
    if (!it->is_array()) throw ConfigError("schema: 'categorical' must be an array");
    for (const json& c : *it) {
      reject_unknown(c, {"name", "cardinality", "importance", "num_embeddings", "underlying_dim", "hotness"},
                     "schema.categorical");
      CategoricalFeature f;
      f.name = get_or<std::string>(c, "name", "");
      f.cardinality = get_or<std::size_t>(c, "cardinality", 0);
      const std::string imp = get_or<std::string>(c, "importance", "major");
      if (imp == "major") {
        f.importance = Importance::major;
      } else if (imp == "minor") {
        f.importance = Importance::minor;
      } else {
        throw ConfigError("schema: feature '" + f.name + "' has importance '" + imp + "'");
      }
      f.num_embeddings = get_or<std::size_t>(c, "num_embeddings", 1);
      f.underlying_dim = get_or<std::size_t>(c, "underlying_dim", 0);
      f.hotness = get_or<std::size_t>(c, "hotness", 1);
      s.categorical_features.push_back(std::move(f));
    }
  }
  return s;
}

json config_to_json(const WukongConfig& c) {
  return json{{"d", c.d},
              {"l", c.l},
              {"n_F", c.n_F},
              {"n_L", c.n_L},
              {"k", c.k},
              {"fm_variant", fm_variant_name(c.fm_variant)},
              {"n_A", c.n_A},
              {"attn_mlp", c.attn_mlp},
              {"fmb_mlp", c.fmb_mlp},
              {"head_mlp", c.head_mlp},
              {"dense_mlp", c.dense_mlp},
              {"ln_eps", c.ln_eps},
              {"linear_test_mode", c.linear_test_mode},
              {"ablate", {{"fmb", c.ablate.fmb}, {"lcb", c.ablate.lcb}, {"residual", c.ablate.residual}}},
              {"seed", c.seed},
              {"schema", schema_to_json(c.schema)}};
}

WukongConfig config_from_json(const json& j, const std::filesystem::path& base_dir) {
  if (!j.is_object()) throw ConfigError("config: expected a JSON object");
  reject_unknown(j,
                 {"d", "l", "n_F", "n_L", "k", "fm_variant", "n_A", "attn_mlp", "fmb_mlp", "head_mlp",
                  "dense_mlp", "ln_eps", "linear_test_mode", "ablate", "seed", "schema", "schema_path",
                  "train", "comment"},
                 "config");
  WukongConfig c;
  c.d = get_or(j, "d", c.d);
  c.l = get_or(j, "l", c.l);
  c.n_F = get_or(j, "n_F", c.n_F);
  c.n_L = get_or(j, "n_L", c.n_L);
  c.k = get_or(j, "k", c.k);
  c.fm_variant = parse_fm_variant(get_or<std::string>(j, "fm_variant", fm_variant_name(c.fm_variant)));
  c.n_A = get_or(j, "n_A", c.n_A);
  c.attn_mlp = get_or(j, "attn_mlp", c.attn_mlp);
  c.fmb_mlp = get_or(j, "fmb_mlp", c.fmb_mlp);
  c.head_mlp = get_or(j, "head_mlp", c.head_mlp);
  c.dense_mlp = get_or(j, "dense_mlp", c.dense_mlp);
  c.ln_eps = get_or(j, "ln_eps", c.ln_eps);
  c.linear_test_mode = get_or(j, "linear_test_mode", c.linear_test_mode);
  c.seed = get_or(j, "seed", c.seed);
  if (auto it = j.find("ablate"); it != j.end()) {
    reject_unknown(*it, {"fmb", "lcb", "residual"}, "config.ablate");
    c.ablate.fmb = get_or(*it, "fmb", false);
    c.ablate.lcb = get_or(*it, "lcb", false);
    c.ablate.residual = get_or(*it, "residual", false);
  }
  if (j.contains("schema") && j.contains("schema_path")) {
    throw ConfigError("config: give either 'schema' or 'schema_path', not both");
  }
  if (auto it = j.find("schema"); it != j.end()) {
    c.schema = schema_from_json(*it);
  } else if (auto p = j.find("schema_path"); p != j.end()) {
    std::filesystem::path sp = p->get<std::string>();
    if (sp.is_relative()) sp = base_dir / sp;
    c.schema = schema_from_json(read_json_file(sp));
  }
  return c;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json read_json_file(const std::filesystem::path& path) {
  const std::string text = read_text_file(path);
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("'" + path.string() + "' is not valid JSON: " + e.what());
  }
}

WukongConfig load_config(const std::filesystem::path& path) {
  WukongConfig c = config_from_json(read_json_file(path), path.parent_path());
  c.validate();
  return c;
}

void save_config(const WukongConfig& c, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write '" + path.string() + "'");
  out << config_to_json(c).dump(2) << "\n";
}

std::string config_digest(const WukongConfig& c) {
  const std::uint64_t h = fnv1a64(config_to_json(c).dump());
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace wukong
