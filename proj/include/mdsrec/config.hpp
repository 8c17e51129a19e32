#pragma once

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "mdsrec/common.hpp"
#include "mdsrec/tape.hpp"

namespace mdsrec {

// Shortest decimal form that parses back to the same double.
inline std::string fmt_double(double v) {
  char buf[64];
  for (int prec = 15; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof(buf), "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) return buf;
  }
  return buf;
}

// Line-based `key = value` text; '#' starts a comment, blank lines skipped.
inline std::vector<std::pair<std::string, std::string>> parse_kv_text(
    const std::string& text, const std::string& origin) {
  auto trim = [](std::string s) {
    const char* ws = " \t\r";
    const auto a = s.find_first_not_of(ws);
    if (a == std::string::npos) return std::string();
    const auto b = s.find_last_not_of(ws);
    return s.substr(a, b - a + 1);
  };
  std::vector<std::pair<std::string, std::string>> out;
  std::size_t line_no = 0, pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    std::string line = text.substr(pos, nl == std::string::npos ? nl : nl - pos);
    pos = nl == std::string::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      fail_as<DataError>(origin, ":", line_no, ": expected `key = value`, got: ", line);
    std::string key = trim(line.substr(0, eq));
    std::string val = trim(line.substr(eq + 1));
    if (key.empty()) fail_as<DataError>(origin, ":", line_no, ": empty key");
    out.emplace_back(std::move(key), std::move(val));
  }
  return out;
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail_as<DataError>("cannot open ", path);
  std::string s((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return s;
}

inline std::vector<std::pair<std::string, std::string>> parse_kv_file(const std::string& path) {
  return parse_kv_text(read_text_file(path), path);
}

struct ModelConfig {
  int d = 64;
  int d_ff = 0;  // 0: use d
  int max_len = 50;
  int layers = 2;
  int heads = 2;
  int h = 10;  // graph neighbors per item
  int k = 32;  // interest clusters per modality
  double mu_id = 16.0;
  double mu_modal = 0.2;
  double rho_visual = 0.5;
  double rho_textual = 0.5;
  double tau = 0.5;
  double lr = 1e-3;
  int batch_size = 512;
  int max_epochs = 500;
  int patience = 10;
  std::uint64_t seed = 42;
  std::string activation = "gelu";

  bool ablate_dis = false;
  bool ablate_cre = false;
  bool ablate_mrgc = false;
  bool ablate_ica = false;

  bool tie_positions = true;          // one position table across channels
  bool graphconv_injected_id = false; // convolve the injected table instead of raw
  bool graph_row_scale = false;       // 1/H scaling of adjacency rows
  double cooccur_floor = 0.0;
  bool cooccur_row_norm = false;
  bool filter_interacted = false;     // drop seen items from rankings
  bool prefix_augment = false;        // train on every prefix, not just the last

  int ffn_width() const { return d_ff > 0 ? d_ff : d; }
  int head_dim() const { return d / heads; }
  ad::Activation act() const {
    return activation == "relu" ? ad::Activation::relu : ad::Activation::gelu;
  }

  void validate() const {
    auto bad = [](auto&&... m) { fail_as<UsageError>("config: ", m...); };
    if (d <= 0) bad("d must be positive");
    if (heads <= 0 || d % heads != 0) bad("d (", d, ") must be divisible by heads (", heads, ")");
    if (d_ff < 0) bad("d_ff must be >= 0");
    if (max_len < 1) bad("max_len must be >= 1");
    if (layers < 0) bad("layers must be >= 0");
    if (h < 0) bad("h must be >= 0");
    if (k < 1) bad("k must be >= 1");
    if (mu_id < 0 || mu_modal < 0) bad("mu weights must be >= 0");
    if (std::fabs(rho_visual + rho_textual - 1.0) > 1e-9)
      bad("rho_visual + rho_textual must equal 1, got ", fmt_double(rho_visual + rho_textual));
    if (tau <= 0) bad("tau must be positive");
    if (lr <= 0) bad("lr must be positive");
    if (batch_size < 1) bad("batch_size must be >= 1");
    if (max_epochs < 0) bad("max_epochs must be >= 0");
    if (patience < 1) bad("patience must be >= 1");
    if (activation != "gelu" && activation != "relu")
      bad("activation must be gelu or relu, got ", activation);
  }

  void set(const std::string& key, const std::string& val) {
    auto as_int = [&](int& slot) {
      try {
        slot = std::stoi(val);
      } catch (...) {
        fail_as<UsageError>("config: ", key, " expects an integer, got ", val);
      }
    };
    auto as_double = [&](double& slot) {
      char* end = nullptr;
      slot = std::strtod(val.c_str(), &end);
      if (end == val.c_str() || *end != '\0')
        fail_as<UsageError>("config: ", key, " expects a number, got ", val);
    };
    auto as_bool = [&](bool& slot) {
      if (val == "true" || val == "1") slot = true;
      else if (val == "false" || val == "0") slot = false;
      else fail_as<UsageError>("config: ", key, " expects true/false, got ", val);
    };
    if (key == "d") as_int(d);
    else if (key == "d_ff") as_int(d_ff);
    else if (key == "max_len") as_int(max_len);
    else if (key == "layers") as_int(layers);
    else if (key == "heads") as_int(heads);
    else if (key == "h") as_int(h);
    else if (key == "k") as_int(k);
    else if (key == "mu_id") as_double(mu_id);
    else if (key == "mu_modal") as_double(mu_modal);
    else if (key == "rho_visual") as_double(rho_visual);
    else if (key == "rho_textual") as_double(rho_textual);
    else if (key == "tau") as_double(tau);
    else if (key == "lr") as_double(lr);
    else if (key == "batch_size") as_int(batch_size);
    else if (key == "max_epochs") as_int(max_epochs);
    else if (key == "patience") as_int(patience);
    else if (key == "seed") {
      try {
        seed = std::stoull(val);
      } catch (...) {
        fail_as<UsageError>("config: seed expects an unsigned integer, got ", val);
      }
    } else if (key == "activation") activation = val;
    else if (key == "ablate_dis") as_bool(ablate_dis);
    else if (key == "ablate_cre") as_bool(ablate_cre);
    else if (key == "ablate_mrgc") as_bool(ablate_mrgc);
    else if (key == "ablate_ica") as_bool(ablate_ica);
    else if (key == "tie_positions") as_bool(tie_positions);
    else if (key == "graphconv_injected_id") as_bool(graphconv_injected_id);
    else if (key == "graph_row_scale") as_bool(graph_row_scale);
    else if (key == "cooccur_floor") as_double(cooccur_floor);
    else if (key == "cooccur_row_norm") as_bool(cooccur_row_norm);
    else if (key == "filter_interacted") as_bool(filter_interacted);
    else if (key == "prefix_augment") as_bool(prefix_augment);
    else fail_as<UsageError>("config: unknown key `", key, "`");
  }

  void load_file(const std::string& path) {
    for (const auto& [k2, v2] : parse_kv_file(path)) set(k2, v2);
  }

  // Every field made explicit, fixed order; parsing this text back
  // reconstructs the config exactly.
  std::string resolved() const {
    std::string s;
    auto put = [&](const char* key, const std::string& v) {
      s += key;
      s += " = ";
      s += v;
      s += "\n";
    };
    put("d", std::to_string(d));
    put("d_ff", std::to_string(d_ff));
    put("max_len", std::to_string(max_len));
    put("layers", std::to_string(layers));
    put("heads", std::to_string(heads));
    put("h", std::to_string(h));
    put("k", std::to_string(k));
    put("mu_id", fmt_double(mu_id));
    put("mu_modal", fmt_double(mu_modal));
    put("rho_visual", fmt_double(rho_visual));
    put("rho_textual", fmt_double(rho_textual));
    put("tau", fmt_double(tau));
    put("lr", fmt_double(lr));
    put("batch_size", std::to_string(batch_size));
    put("max_epochs", std::to_string(max_epochs));
    put("patience", std::to_string(patience));
    put("seed", std::to_string(seed));
    put("activation", activation);
    put("ablate_dis", ablate_dis ? "true" : "false");
    put("ablate_cre", ablate_cre ? "true" : "false");
    put("ablate_mrgc", ablate_mrgc ? "true" : "false");
    put("ablate_ica", ablate_ica ? "true" : "false");
    put("tie_positions", tie_positions ? "true" : "false");
    put("graphconv_injected_id", graphconv_injected_id ? "true" : "false");
    put("graph_row_scale", graph_row_scale ? "true" : "false");
    put("cooccur_floor", fmt_double(cooccur_floor));
    put("cooccur_row_norm", cooccur_row_norm ? "true" : "false");
    put("filter_interacted", filter_interacted ? "true" : "false");
    put("prefix_augment", prefix_augment ? "true" : "false");
    return s;
  }
};

}  // namespace mdsrec
