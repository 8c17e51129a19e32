#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <string>
#include <unordered_map>
#include <vector>

#include "mdsrec/common.hpp"
#include "mdsrec/config.hpp"
#include "mdsrec/rng.hpp"
#include "mdsrec/tensor.hpp"

namespace mdsrec {

// Per-user time-ordered item sequences over a densely re-indexed catalog.
// Users with fewer than 3 interactions are dropped at load (the held-out
// split needs two targets) and counted in `dropped_users`.
struct InteractionDataset {
  int n_users = 0;
  int n_items = 0;
  std::int64_t n_interactions = 0;
  std::vector<std::vector<int>> sequences;  // indexed by dense user id
  std::vector<std::string> user_tokens;     // dense id -> source token
  std::vector<std::string> item_tokens;
  int dropped_users = 0;

  int pad_index() const { return n_items; }

  double sparsity() const {
    return 1.0 - static_cast<double>(n_interactions) /
                     (static_cast<double>(n_users) * static_cast<double>(n_items));
  }
  double avg_length() const {
    return static_cast<double>(n_interactions) / static_cast<double>(n_users);
  }
};

// One |X| x d_m feature matrix; items missing from the source file keep zero
// rows and are counted.
struct ModalFeatureTable {
  std::string modality;  // "visual" or "textual"
  int d_m = 0;
  Tensor rows;           // n_items x d_m
  int zero_rows = 0;
};

struct SplitDataset {
  std::vector<std::vector<int>> train;  // S^u minus the last two items
  std::vector<int> valid_target;
  std::vector<int> test_target;

  int n_users() const { return static_cast<int>(train.size()); }
};

// Left-padded batch: PAD fills the front, the most recent item sits at
// column t-1. pad_mask is 1.0 at real positions, 0.0 at PAD.
struct Batch {
  std::vector<int> user_ids;
  std::vector<std::vector<int>> item_ids;  // B rows of length t
  Tensor pad_mask;                         // B x t
  std::vector<int> targets;
  int t = 0;

  int size() const { return static_cast<int>(item_ids.size()); }
  int real_len(int b) const {
    int len = 0;
    for (int j = 0; j < t; ++j)
      if (pad_mask(b, j) != 0.0) ++len;
    return len;
  }
  // The unpadded suffix (most recent items, oldest first).
  std::vector<int> real_items(int b) const {
    std::vector<int> out;
    for (int j = 0; j < t; ++j)
      if (pad_mask(b, j) != 0.0) out.push_back(item_ids[static_cast<std::size_t>(b)][static_cast<std::size_t>(j)]);
    return out;
  }
};

namespace detail {

inline bool split_tabs(const std::string& line, std::vector<std::string>& fields) {
  fields.clear();
  std::size_t start = 0;
  while (true) {
    const auto tab = line.find('\t', start);
    if (tab == std::string::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
  return true;
}

}  // namespace detail

// `user<TAB>item<TAB>timestamp` per line, '#' comments. Users and items are
// re-indexed densely in order of first appearance; per-user rows are sorted
// by timestamp with ties kept in file order.
inline InteractionDataset load_interactions(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail_as<DataError>("cannot open interactions file ", path);

  struct Row {
    int user, item;
    long long ts;
    std::int64_t order;
  };
  std::vector<Row> rows;
  std::unordered_map<std::string, int> user_ids, item_ids;
  std::vector<std::string> user_tokens, item_tokens;

  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> fields;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    detail::split_tabs(line, fields);
    if (fields.size() != 3 || fields[0].empty() || fields[1].empty())
      fail_as<DataError>(path, ":", line_no, ": expected user<TAB>item<TAB>timestamp");
    long long ts = 0;
    try {
      ts = std::stoll(fields[2]);
    } catch (...) {
      fail_as<DataError>(path, ":", line_no, ": bad timestamp `", fields[2], "`");
    }
    auto intern = [](std::unordered_map<std::string, int>& m, std::vector<std::string>& toks,
                     const std::string& tok) {
      auto it = m.find(tok);
      if (it != m.end()) return it->second;
      const int id = static_cast<int>(toks.size());
      m.emplace(tok, id);
      toks.push_back(tok);
      return id;
    };
    rows.push_back({intern(user_ids, user_tokens, fields[0]),
                    intern(item_ids, item_tokens, fields[1]), ts,
                    static_cast<std::int64_t>(rows.size())});
  }
  if (rows.empty()) fail_as<DataError>(path, ": no interactions found");

  std::vector<std::vector<Row>> per_user(user_tokens.size());
  for (const Row& r : rows) per_user[static_cast<std::size_t>(r.user)].push_back(r);
  for (auto& seq : per_user)
    std::stable_sort(seq.begin(), seq.end(), [](const Row& a, const Row& b) {
      return a.ts != b.ts ? a.ts < b.ts : a.order < b.order;
    });

  InteractionDataset ds;
  ds.item_tokens = item_tokens;
  ds.n_items = static_cast<int>(item_tokens.size());
  for (std::size_t u = 0; u < per_user.size(); ++u) {
    if (per_user[u].size() < 3) {
      ++ds.dropped_users;
      continue;
    }
    std::vector<int> seq;
    seq.reserve(per_user[u].size());
    for (const Row& r : per_user[u]) seq.push_back(r.item);
    ds.n_interactions += static_cast<std::int64_t>(seq.size());
    ds.sequences.push_back(std::move(seq));
    ds.user_tokens.push_back(user_tokens[u]);
  }
  if (ds.sequences.empty())
    fail_as<DataError>(path, ": every user has fewer than 3 interactions");
  ds.n_users = static_cast<int>(ds.sequences.size());
  return ds;
}

namespace detail {

inline void write_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16),
                        static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

inline std::uint32_t read_u32(std::istream& in, const std::string& what) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in) fail_as<DataError>("truncated ", what);
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

inline void write_f32(std::ostream& out, float f) {
  std::uint32_t bits;
  std::memcpy(&bits, &f, 4);
  write_u32(out, bits);
}

inline float read_f32(std::istream& in, const std::string& what) {
  const std::uint32_t bits = read_u32(in, what);
  float f;
  std::memcpy(&f, &bits, 4);
  return f;
}

}  // namespace detail

// Binary feature format: magic "MDSF", u32 version=1, u32 n_items, u32 d_m,
// then n_items rows of d_m little-endian f32, in dense item order.
inline void save_modal_features_binary(const std::string& path, const Tensor& rows) {
  require(rows.rank() == 2, "feature table must be rank-2");
  std::ofstream out(path, std::ios::binary);
  if (!out) fail_as<DataError>("cannot write ", path);
  out.write("MDSF", 4);
  detail::write_u32(out, 1);
  detail::write_u32(out, static_cast<std::uint32_t>(rows.dim(0)));
  detail::write_u32(out, static_cast<std::uint32_t>(rows.dim(1)));
  for (std::int64_t i = 0; i < rows.size(); ++i)
    detail::write_f32(out, static_cast<float>(rows[i]));
  if (!out) fail_as<DataError>("failed writing ", path);
}

// Loads either form:
//  - binary MDSF (dense item order; n_items must match the catalog), or
//  - text `item<TAB>f1 f2 ... fd_m` where `item` is a source token; items
//    absent from the file keep zero rows, counted in `zero_rows`.
inline ModalFeatureTable load_modal_features(const std::string& path, const std::string& modality,
                                             const InteractionDataset& ds) {
  ModalFeatureTable table;
  table.modality = modality;

  std::ifstream probe(path, std::ios::binary);
  if (!probe) fail_as<DataError>("cannot open ", modality, " feature file ", path);
  char magic[4] = {0, 0, 0, 0};
  probe.read(magic, 4);
  if (probe && std::memcmp(magic, "MDSF", 4) == 0) {
    const std::uint32_t version = detail::read_u32(probe, path);
    if (version != 1) fail_as<DataError>(path, ": unsupported feature file version ", version);
    const std::uint32_t n_items = detail::read_u32(probe, path);
    const std::uint32_t d_m = detail::read_u32(probe, path);
    if (n_items != static_cast<std::uint32_t>(ds.n_items))
      fail_as<DataError>(path, ": has ", n_items, " items, catalog has ", ds.n_items);
    if (d_m == 0) fail_as<DataError>(path, ": zero feature width");
    table.d_m = static_cast<int>(d_m);
    table.rows = Tensor({ds.n_items, table.d_m});
    for (std::int64_t i = 0; i < table.rows.size(); ++i)
      table.rows[i] = static_cast<double>(detail::read_f32(probe, path));
  } else {
    probe.close();
    std::unordered_map<std::string, int> item_ids;
    for (int i = 0; i < ds.n_items; ++i) item_ids.emplace(ds.item_tokens[static_cast<std::size_t>(i)], i);
    std::ifstream in(path);
    std::string line;
    std::size_t line_no = 0;
    std::vector<std::string> fields;
    std::vector<std::vector<double>> parsed(static_cast<std::size_t>(ds.n_items));
    std::vector<bool> seen(static_cast<std::size_t>(ds.n_items), false);
    while (std::getline(in, line)) {
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      const auto hash = line.find('#');
      if (hash != std::string::npos) line = line.substr(0, hash);
      if (line.find_first_not_of(" \t") == std::string::npos) continue;
      detail::split_tabs(line, fields);
      if (fields.size() != 2)
        fail_as<DataError>(path, ":", line_no, ": expected item<TAB>f1 f2 ...");
      auto it = item_ids.find(fields[0]);
      if (it == item_ids.end())
        fail_as<DataError>(path, ":", line_no, ": item `", fields[0], "` not in catalog");
      std::vector<double> vals;
      const char* p = fields[1].c_str();
      char* end = nullptr;
      while (*p) {
        const double v = std::strtod(p, &end);
        if (end == p) fail_as<DataError>(path, ":", line_no, ": bad feature value near `", p, "`");
        vals.push_back(v);
        p = end;
        while (*p == ' ' || *p == '\t') ++p;
      }
      if (vals.empty()) fail_as<DataError>(path, ":", line_no, ": no feature values");
      if (table.d_m == 0) table.d_m = static_cast<int>(vals.size());
      if (static_cast<int>(vals.size()) != table.d_m)
        fail_as<DataError>(path, ":", line_no, ": row has ", vals.size(),
                           " values, expected ", table.d_m);
      if (seen[static_cast<std::size_t>(it->second)])
        fail_as<DataError>(path, ":", line_no, ": duplicate row for item `", fields[0], "`");
      seen[static_cast<std::size_t>(it->second)] = true;
      parsed[static_cast<std::size_t>(it->second)] = std::move(vals);
    }
    if (table.d_m == 0) fail_as<DataError>(path, ": no feature rows found");
    table.rows = Tensor({ds.n_items, table.d_m});
    for (int i = 0; i < ds.n_items; ++i)
      if (seen[static_cast<std::size_t>(i)])
        for (int j = 0; j < table.d_m; ++j)
          table.rows(i, j) = parsed[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  }

  for (int i = 0; i < ds.n_items; ++i) {
    bool all_zero = true;
    for (int j = 0; j < table.d_m && all_zero; ++j)
      if (table.rows(i, j) != 0.0) all_zero = false;
    if (all_zero) ++table.zero_rows;
  }
  require(table.rows.all_finite(), modality, " features contain NaN/Inf");
  return table;
}

// Last item is the test target, the one before it the validation target,
// the rest the training prefix.
inline SplitDataset split_leave_one_out(const InteractionDataset& ds) {
  SplitDataset split;
  split.train.reserve(ds.sequences.size());
  for (const auto& seq : ds.sequences) {
    require(seq.size() >= 3, "split: sequence shorter than 3");
    split.train.emplace_back(seq.begin(), seq.end() - 2);
    split.valid_target.push_back(seq[seq.size() - 2]);
    split.test_target.push_back(seq.back());
  }
  return split;
}

// One (input sequence, next-item target) pair; inputs longer than max_len
// are truncated to the most recent max_len items downstream.
struct TrainExample {
  int user;
  std::vector<int> input;
  int target;
};

// The final next-item task per user: input = train prefix minus its last
// item, target = that last item. Users whose prefix has a single item have
// no trainable pair and are skipped. With prefix_augment, every prefix of
// the training sequence becomes an example.
inline std::vector<TrainExample> build_train_examples(const SplitDataset& split,
                                                      bool prefix_augment) {
  std::vector<TrainExample> out;
  for (int u = 0; u < split.n_users(); ++u) {
    const auto& seq = split.train[static_cast<std::size_t>(u)];
    if (seq.size() < 2) continue;
    if (prefix_augment) {
      for (std::size_t j = 1; j < seq.size(); ++j)
        out.push_back({u, std::vector<int>(seq.begin(), seq.begin() + static_cast<std::ptrdiff_t>(j)),
                       seq[j]});
    } else {
      out.push_back({u, std::vector<int>(seq.begin(), seq.end() - 1), seq.back()});
    }
  }
  return out;
}

// Evaluation tasks: valid ranks valid_target given the train prefix; test
// ranks test_target given the prefix plus the valid item.
enum class EvalSplit { valid, test };

inline std::vector<TrainExample> build_eval_examples(const SplitDataset& split, EvalSplit which) {
  std::vector<TrainExample> out;
  out.reserve(static_cast<std::size_t>(split.n_users()));
  for (int u = 0; u < split.n_users(); ++u) {
    std::vector<int> input = split.train[static_cast<std::size_t>(u)];
    if (which == EvalSplit::valid) {
      out.push_back({u, std::move(input), split.valid_target[static_cast<std::size_t>(u)]});
    } else {
      input.push_back(split.valid_target[static_cast<std::size_t>(u)]);
      out.push_back({u, std::move(input), split.test_target[static_cast<std::size_t>(u)]});
    }
  }
  return out;
}

// Packs examples into left-padded batches. `order_rng` shuffles example
// order when given (training); evaluation keeps the fixed order.
inline std::vector<Batch> make_batches(const std::vector<TrainExample>& examples, int batch_size,
                                       int max_len, int pad_index, Rng* order_rng = nullptr) {
  require(batch_size >= 1, "make_batches: batch_size must be >= 1");
  require(max_len >= 1, "make_batches: max_len must be >= 1");
  std::vector<std::size_t> order(examples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  if (order_rng) order_rng->shuffle(order);

  std::vector<Batch> batches;
  for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(batch_size)) {
    const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(batch_size));
    Batch b;
    b.t = max_len;
    const int rows = static_cast<int>(stop - start);
    b.pad_mask = Tensor({rows, max_len});
    for (std::size_t pos = start; pos < stop; ++pos) {
      const TrainExample& ex = examples[order[pos]];
      require(ex.target != pad_index, "batch: target is PAD");
      require(!ex.input.empty(), "batch: empty input sequence");
      const int row = static_cast<int>(pos - start);
      std::vector<int> ids(static_cast<std::size_t>(max_len), pad_index);
      const int keep = std::min<int>(max_len, static_cast<int>(ex.input.size()));
      for (int j = 0; j < keep; ++j) {
        ids[static_cast<std::size_t>(max_len - keep + j)] =
            ex.input[ex.input.size() - static_cast<std::size_t>(keep) + static_cast<std::size_t>(j)];
        b.pad_mask(row, max_len - keep + j) = 1.0;
      }
      b.user_ids.push_back(ex.user);
      b.item_ids.push_back(std::move(ids));
      b.targets.push_back(ex.target);
    }
    batches.push_back(std::move(b));
  }
  return batches;
}

// ---- synthetic data with planted structure ----

struct SynthSpec {
  int n_users = 200;
  int n_items = 100;
  int k_true = 4;
  int d_visual = 16;
  int d_textual = 16;
  int len_min = 5;
  int len_max = 12;
  std::string rule = "markov_id";  // markov_id | modal_neighbor | mixed
  int nn_size = 5;                 // neighbor pool under modal_neighbor
  std::int64_t n_inters = 0;       // 0: lengths free; else exact total

  static SynthSpec parse(const std::string& text, const std::string& origin) {
    SynthSpec s;
    for (const auto& [key, val] : parse_kv_text(text, origin)) {
      auto as_int = [&, k2 = key, v2 = val](int& slot) {
        try {
          slot = std::stoi(v2);
        } catch (...) {
          fail_as<DataError>(origin, ": ", k2, " expects an integer, got ", v2);
        }
      };
      if (key == "n_users") as_int(s.n_users);
      else if (key == "n_items") as_int(s.n_items);
      else if (key == "k_true") as_int(s.k_true);
      else if (key == "d_visual") as_int(s.d_visual);
      else if (key == "d_textual") as_int(s.d_textual);
      else if (key == "len_min") as_int(s.len_min);
      else if (key == "len_max") as_int(s.len_max);
      else if (key == "rule") s.rule = val;
      else if (key == "nn_size") as_int(s.nn_size);
      else if (key == "n_inters") {
        try {
          s.n_inters = std::stoll(val);
        } catch (...) {
          fail_as<DataError>(origin, ": n_inters expects an integer, got ", val);
        }
      } else fail_as<DataError>(origin, ": unknown synth key `", key, "`");
    }
    return s;
  }

  void validate() const {
    auto bad = [](auto&&... m) { fail_as<DataError>("synth spec: ", m...); };
    if (n_users < 1 || n_items < 2) bad("need n_users >= 1 and n_items >= 2");
    if (k_true < 1 || k_true > n_items) bad("k_true must be in [1, n_items]");
    if (d_visual < 1 || d_textual < 1) bad("feature widths must be >= 1");
    if (len_min < 3) bad("len_min must be >= 3 (split needs 3 interactions)");
    if (len_max < len_min) bad("len_max must be >= len_min");
    if (rule != "markov_id" && rule != "modal_neighbor" && rule != "mixed")
      bad("rule must be markov_id, modal_neighbor or mixed");
    if (nn_size < 1 || nn_size >= n_items) bad("nn_size must be in [1, n_items)");
    if (n_inters > 0) {
      if (n_inters < static_cast<std::int64_t>(n_users) * len_min ||
          n_inters > static_cast<std::int64_t>(n_users) * len_max)
        bad("n_inters must lie in [n_users*len_min, n_users*len_max]");
    }
  }
};

struct SynthResult {
  InteractionDataset dataset;
  ModalFeatureTable visual;
  ModalFeatureTable textual;
  std::vector<int> labels_visual;   // planted cluster per item
  std::vector<int> labels_textual;
  std::vector<int> permutation;     // markov_id successor map (empty otherwise)
};

namespace detail {

// Gaussian blobs around k_true centers rescaled to pairwise distance
// >= 10 sigma (sigma = 1), so the clusters are unambiguous.
inline Tensor planted_features(int n_items, int d_m, const std::vector<int>& labels, int k_true,
                               Rng& rng) {
  Tensor centers({k_true, d_m});
  for (std::int64_t i = 0; i < centers.size(); ++i) centers[i] = rng.normal();
  if (k_true > 1) {
    double min_dist = std::numeric_limits<double>::infinity();
    for (int a = 0; a < k_true; ++a)
      for (int b = a + 1; b < k_true; ++b) {
        double d2 = 0.0;
        for (int j = 0; j < d_m; ++j) {
          const double dd = centers(a, j) - centers(b, j);
          d2 += dd * dd;
        }
        min_dist = std::min(min_dist, std::sqrt(d2));
      }
    const double want = 10.0;
    if (min_dist < want && min_dist > 0.0) {
      const double f = want / min_dist;
      for (std::int64_t i = 0; i < centers.size(); ++i) centers[i] *= f;
    }
    require(min_dist > 0.0, "synth: coincident cluster centers (degenerate draw)");
  }
  Tensor feats({n_items, d_m});
  for (int i = 0; i < n_items; ++i)
    for (int j = 0; j < d_m; ++j)
      feats(i, j) = centers(labels[static_cast<std::size_t>(i)], j) + rng.normal();
  return feats;
}

inline std::vector<std::vector<int>> nearest_neighbors(const Tensor& feats, int nn_size) {
  const int n = feats.dim(0), d = feats.dim(1);
  std::vector<std::vector<int>> nn(static_cast<std::size_t>(n));
  std::vector<std::pair<double, int>> dist(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      double d2 = 0.0;
      for (int c = 0; c < d; ++c) {
        const double dd = feats(i, c) - feats(j, c);
        d2 += dd * dd;
      }
      dist[static_cast<std::size_t>(j)] = {d2, j};
    }
    dist[static_cast<std::size_t>(i)].first = std::numeric_limits<double>::infinity();
    std::sort(dist.begin(), dist.end());
    for (int r = 0; r < nn_size; ++r) nn[static_cast<std::size_t>(i)].push_back(dist[static_cast<std::size_t>(r)].second);
  }
  return nn;
}

}  // namespace detail

// Deterministic synthetic data. Start items cycle round-robin so every item
// appears; markov_id walks a fixed permutation (fully memorizable),
// modal_neighbor samples the next item from the current item's nearest
// neighbors in one coin-flipped modality, mixed alternates rules per user.
inline SynthResult synth_generate(const SynthSpec& spec, std::uint64_t seed) {
  spec.validate();
  Rng rng = substream(seed, "synth");

  SynthResult out;
  const int n = spec.n_items;

  out.labels_visual.resize(static_cast<std::size_t>(n));
  out.labels_textual.resize(static_cast<std::size_t>(n));
  const int block = (n + spec.k_true - 1) / spec.k_true;
  for (int i = 0; i < n; ++i) {
    out.labels_visual[static_cast<std::size_t>(i)] = i % spec.k_true;
    out.labels_textual[static_cast<std::size_t>(i)] = i / block;
  }

  out.visual.modality = "visual";
  out.visual.d_m = spec.d_visual;
  out.visual.rows = detail::planted_features(n, spec.d_visual, out.labels_visual, spec.k_true, rng);
  out.textual.modality = "textual";
  out.textual.d_m = spec.d_textual;
  out.textual.rows = detail::planted_features(n, spec.d_textual, out.labels_textual, spec.k_true, rng);

  std::vector<std::vector<int>> nn_v, nn_t;
  if (spec.rule != "markov_id") {
    nn_v = detail::nearest_neighbors(out.visual.rows, spec.nn_size);
    nn_t = detail::nearest_neighbors(out.textual.rows, spec.nn_size);
  }
  if (spec.rule != "modal_neighbor") {
    out.permutation.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) out.permutation[static_cast<std::size_t>(i)] = i;
    rng.shuffle(out.permutation);
  }

  std::vector<int> lengths(static_cast<std::size_t>(spec.n_users));
  for (auto& len : lengths)
    len = spec.len_min + static_cast<int>(rng.uniform_int(
                             static_cast<std::uint64_t>(spec.len_max - spec.len_min + 1)));
  if (spec.n_inters > 0) {
    std::int64_t total = 0;
    for (int len : lengths) total += len;
    std::size_t cursor = 0;
    while (total != spec.n_inters) {
      auto& len = lengths[cursor % lengths.size()];
      if (total > spec.n_inters && len > spec.len_min) {
        --len;
        --total;
      } else if (total < spec.n_inters && len < spec.len_max) {
        ++len;
        ++total;
      }
      ++cursor;
    }
  }

  InteractionDataset& ds = out.dataset;
  ds.n_items = n;
  for (int i = 0; i < n; ++i) ds.item_tokens.push_back(std::to_string(i));
  for (int u = 0; u < spec.n_users; ++u) {
    const bool markov = spec.rule == "markov_id" || (spec.rule == "mixed" && u % 2 == 0);
    std::vector<int> seq;
    int cur = u % n;  // round-robin starts cover the catalog
    seq.push_back(cur);
    while (static_cast<int>(seq.size()) < lengths[static_cast<std::size_t>(u)]) {
      if (markov) {
        cur = out.permutation[static_cast<std::size_t>(cur)];
      } else {
        const auto& pool = rng.next_u64() % 2 == 0 ? nn_v[static_cast<std::size_t>(cur)]
                                                   : nn_t[static_cast<std::size_t>(cur)];
        cur = pool[static_cast<std::size_t>(rng.uniform_int(pool.size()))];
      }
      seq.push_back(cur);
    }
    ds.n_interactions += static_cast<std::int64_t>(seq.size());
    ds.sequences.push_back(std::move(seq));
    ds.user_tokens.push_back(std::to_string(u));
  }
  ds.n_users = spec.n_users;
  return out;
}

// Writes a dataset back out in the standard interactions format (the
// position in the sequence serves as the timestamp).
inline void save_interactions(const std::string& path, const InteractionDataset& ds) {
  std::ofstream out(path);
  if (!out) fail_as<DataError>("cannot write ", path);
  for (int u = 0; u < ds.n_users; ++u) {
    const auto& seq = ds.sequences[static_cast<std::size_t>(u)];
    for (std::size_t j = 0; j < seq.size(); ++j)
      out << ds.user_tokens[static_cast<std::size_t>(u)] << '\t'
          << ds.item_tokens[static_cast<std::size_t>(seq[j])] << '\t' << j << '\n';
  }
  if (!out) fail_as<DataError>("failed writing ", path);
}

}  // namespace mdsrec
