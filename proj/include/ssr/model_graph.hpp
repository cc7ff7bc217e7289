#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <queue>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "ssr/error.hpp"

namespace ssr {

enum class LayerKind {
  MatMul,
  BatchMatMul,
  Softmax,
  LayerNorm,
  GeLU,
  Transpose,
  Reformat,
  VectorAdd,
  PatchEmbed,
};

inline constexpr LayerKind kAllLayerKinds[] = {
    LayerKind::MatMul,    LayerKind::BatchMatMul, LayerKind::Softmax,
    LayerKind::LayerNorm, LayerKind::GeLU,        LayerKind::Transpose,
    LayerKind::Reformat,  LayerKind::VectorAdd,   LayerKind::PatchEmbed,
};

// MM-like kinds run on the AIE matrix unit; everything else is a fabric-side kernel.
constexpr bool is_hmm(LayerKind k) {
  return k == LayerKind::MatMul || k == LayerKind::BatchMatMul ||
         k == LayerKind::PatchEmbed;
}
constexpr bool is_hce(LayerKind k) { return !is_hmm(k); }

// Kernels that reduce along a row (reuse distance > 1).
constexpr bool is_reduction(LayerKind k) {
  return k == LayerKind::Softmax || k == LayerKind::LayerNorm;
}

inline std::string_view to_string(LayerKind k) {
  switch (k) {
    case LayerKind::MatMul: return "MatMul";
    case LayerKind::BatchMatMul: return "BatchMatMul";
    case LayerKind::Softmax: return "Softmax";
    case LayerKind::LayerNorm: return "LayerNorm";
    case LayerKind::GeLU: return "GeLU";
    case LayerKind::Transpose: return "Transpose";
    case LayerKind::Reformat: return "Reformat";
    case LayerKind::VectorAdd: return "VectorAdd";
    case LayerKind::PatchEmbed: return "PatchEmbed";
  }
  return "?";
}

inline LayerKind layer_kind_from_string(std::string_view s) {
  for (LayerKind k : kAllLayerKinds)
    if (to_string(k) == s) return k;
  throw ValidationError("unknown layer kind '" + std::string(s) + "'");
}

/// One node of the application graph.
///
/// Matrix kinds use (m, k, n) as the GEMM shape of a single head. Elementwise
/// kinds use m = rows, n = row length and k = 1.
struct Layer {
  int id = 0;
  LayerKind kind = LayerKind::MatMul;
  std::int64_t m = 1;
  std::int64_t k = 1;
  std::int64_t n = 1;
  int heads = 1;
  std::vector<int> deps;
  int activation_inputs = 1;
  std::string name;

  bool operator==(const Layer&) const = default;
};

inline std::int64_t macs(const Layer& l) {
  return is_hmm(l.kind) ? std::int64_t(l.heads) * l.m * l.k * l.n : 0;
}

// INT8 throughout: one byte per element.
inline std::int64_t output_bytes(const Layer& l) {
  return is_hmm(l.kind) ? std::int64_t(l.heads) * l.m * l.n : l.m * l.n;
}

inline std::int64_t input_bytes(const Layer& l) {
  if (!is_hmm(l.kind)) return l.m * l.n;
  std::int64_t lhs = std::int64_t(l.heads) * l.m * l.k;
  if (l.activation_inputs == 2) lhs += std::int64_t(l.heads) * l.k * l.n;
  return lhs;
}

inline std::int64_t weight_bytes(const Layer& l) {
  if (!is_hmm(l.kind) || l.activation_inputs == 2) return 0;
  return std::int64_t(l.heads) * l.k * l.n;
}

struct ModelSpec {
  std::string name = "model";
  int heads = 1;
  int embed_dim = 1;
  int depth = 0;
  int seq_len = 197;
  double mlp_ratio = 4.0;
  int patch = 16;
  int image = 224;

  bool operator==(const ModelSpec&) const = default;

  std::int64_t hidden_dim() const {
    return std::llround(double(embed_dim) * mlp_ratio);
  }
  std::int64_t num_patches() const {
    std::int64_t side = image / patch;
    return side * side;
  }

  void validate() const {
    auto fail = [&](const std::string& what) {
      throw ValidationError("model spec '" + name + "': " + what);
    };
    if (heads < 1) fail("heads must be >= 1");
    if (embed_dim < 1) fail("embed_dim must be >= 1");
    if (embed_dim % heads != 0) fail("embed_dim must be divisible by heads");
    if (depth < 0) fail("depth must be >= 0");
    if (seq_len < 1) fail("seq_len must be >= 1");
    if (patch < 1) fail("patch must be >= 1");
    if (image < patch || image % patch != 0)
      fail("image must be a positive multiple of patch");
    if (!(mlp_ratio > 0.0)) fail("mlp_ratio must be > 0");
    double hidden = double(embed_dim) * mlp_ratio;
    if (std::abs(hidden - std::round(hidden)) > 1e-9)
      fail("embed_dim * mlp_ratio must be an integer");
  }
};

inline void to_json(nlohmann::json& j, const ModelSpec& s) {
  j = nlohmann::json{{"name", s.name},         {"heads", s.heads},
                     {"embed_dim", s.embed_dim}, {"depth", s.depth},
                     {"seq_len", s.seq_len},   {"mlp_ratio", s.mlp_ratio},
                     {"patch", s.patch},       {"image", s.image}};
}

inline void from_json(const nlohmann::json& j, ModelSpec& s) {
  ModelSpec d;
  s.name = j.value("name", d.name);
  s.heads = j.at("heads").get<int>();
  s.embed_dim = j.at("embed_dim").get<int>();
  s.depth = j.at("depth").get<int>();
  s.seq_len = j.value("seq_len", d.seq_len);
  s.mlp_ratio = j.value("mlp_ratio", d.mlp_ratio);
  s.patch = j.value("patch", d.patch);
  s.image = j.value("image", d.image);
}

/// Batch-independent application graph. Layer ids are unique; `index_of`
/// maps an id to its position in `layers`.
class Graph {
 public:
  Graph() = default;
  explicit Graph(std::vector<Layer> layers) : layers_(std::move(layers)) {
    reindex();
  }

  const std::vector<Layer>& layers() const { return layers_; }
  std::size_t size() const { return layers_.size(); }
  bool empty() const { return layers_.empty(); }
  const Layer& operator[](std::size_t pos) const { return layers_[pos]; }

  int add(Layer l) {
    if (index_.count(l.id))
      throw ValidationError("duplicate layer id " + std::to_string(l.id));
    index_[l.id] = layers_.size();
    layers_.push_back(std::move(l));
    return layers_.back().id;
  }

  std::size_t index_of(int id) const {
    auto it = index_.find(id);
    if (it == index_.end())
      throw ValidationError("unknown layer id " + std::to_string(id));
    return it->second;
  }
  bool contains(int id) const { return index_.count(id) != 0; }

  // Dependencies and successors in position space.
  std::vector<std::vector<std::size_t>> dep_positions() const {
    std::vector<std::vector<std::size_t>> out(layers_.size());
    for (std::size_t i = 0; i < layers_.size(); ++i)
      for (int d : layers_[i].deps) out[i].push_back(index_of(d));
    return out;
  }
  std::vector<std::vector<std::size_t>> successor_positions() const {
    std::vector<std::vector<std::size_t>> out(layers_.size());
    for (std::size_t i = 0; i < layers_.size(); ++i)
      for (int d : layers_[i].deps) out[index_of(d)].push_back(i);
    return out;
  }

  void validate() const;

  bool operator==(const Graph& o) const { return layers_ == o.layers_; }

 private:
  void reindex() {
    index_.clear();
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      if (!index_.emplace(layers_[i].id, i).second)
        throw ValidationError("duplicate layer id " +
                              std::to_string(layers_[i].id));
    }
  }

  std::vector<Layer> layers_;
  std::unordered_map<int, std::size_t> index_;
};

inline std::int64_t total_macs(const Graph& g) {
  std::int64_t s = 0;
  for (const auto& l : g.layers()) s += macs(l);
  return s;
}

inline std::int64_t total_weight_bytes(const Graph& g) {
  std::int64_t s = 0;
  for (const auto& l : g.layers()) s += weight_bytes(l);
  return s;
}

/// Kahn's algorithm; among ready layers the smallest id goes first.
inline std::vector<int> topo_order(const Graph& g) {
  const auto& ls = g.layers();
  std::vector<int> indeg(ls.size(), 0);
  std::vector<std::vector<std::size_t>> succ(ls.size());
  for (std::size_t i = 0; i < ls.size(); ++i) {
    for (int d : ls[i].deps) {
      if (d == ls[i].id)
        throw CycleError("layer " + std::to_string(d) + " depends on itself");
      succ[g.index_of(d)].push_back(i);
      ++indeg[i];
    }
  }
  using Item = std::pair<int, std::size_t>;  // (id, pos)
  std::priority_queue<Item, std::vector<Item>, std::greater<>> ready;
  for (std::size_t i = 0; i < ls.size(); ++i)
    if (indeg[i] == 0) ready.emplace(ls[i].id, i);
  std::vector<int> order;
  order.reserve(ls.size());
  while (!ready.empty()) {
    auto [id, pos] = ready.top();
    ready.pop();
    order.push_back(id);
    for (std::size_t s : succ[pos])
      if (--indeg[s] == 0) ready.emplace(ls[s].id, s);
  }
  if (order.size() != ls.size())
    throw CycleError("dependency cycle among " +
                     std::to_string(ls.size() - order.size()) + " layers");
  return order;
}

inline void Graph::validate() const {
  for (const auto& l : layers_) {
    auto where = "layer " + std::to_string(l.id) + ": ";
    if (l.m < 1 || l.k < 1 || l.n < 1)
      throw ValidationError(where + "dimensions must be positive");
    if (l.heads < 1) throw ValidationError(where + "heads must be >= 1");
    if (l.heads != 1 && l.kind != LayerKind::BatchMatMul)
      throw ValidationError(where + "only BatchMatMul carries heads");
    if (l.activation_inputs != 1 && l.activation_inputs != 2)
      throw ValidationError(where + "activation_inputs must be 1 or 2");
    if (l.activation_inputs == 2 && l.kind != LayerKind::BatchMatMul)
      throw ValidationError(where + "two activation operands need BatchMatMul");
    for (int d : l.deps)
      if (!contains(d))
        throw ValidationError(where + "unknown dependency " + std::to_string(d));
  }
  (void)topo_order(*this);
}

namespace detail {

inline Layer hce(int id, LayerKind kind, std::int64_t rows, std::int64_t len,
                 std::vector<int> deps, std::string name) {
  Layer l;
  l.id = id;
  l.kind = kind;
  l.m = rows;
  l.k = 1;
  l.n = len;
  l.deps = std::move(deps);
  l.name = std::move(name);
  return l;
}

inline Layer gemm(int id, LayerKind kind, std::int64_t m, std::int64_t k,
                  std::int64_t n, std::vector<int> deps, std::string name,
                  int heads = 1, int act = 1) {
  Layer l;
  l.id = id;
  l.kind = kind;
  l.m = m;
  l.k = k;
  l.n = n;
  l.heads = heads;
  l.activation_inputs = act;
  l.deps = std::move(deps);
  l.name = std::move(name);
  return l;
}

}  // namespace detail

// Layers emitted per encoder block by build_transformer.
inline constexpr int kLayersPerBlock = 17;

/// Expands a ViT-style encoder into its layer graph: patch embedding followed
/// by `depth` encoder blocks. Reformat nodes sit wherever a fabric-side kernel
/// feeds a matrix unit; the classifier head is not included.
inline Graph build_transformer(const ModelSpec& spec) {
  using detail::gemm;
  using detail::hce;
  using K = LayerKind;
  spec.validate();

  const std::int64_t S = spec.seq_len;
  const std::int64_t E = spec.embed_dim;
  const std::int64_t H = spec.heads;
  const std::int64_t D = E / H;
  const std::int64_t F = spec.hidden_dim();

  Graph g;
  int next = 0;
  auto id = [&] { return next++; };

  int x = g.add(gemm(id(), K::PatchEmbed, spec.num_patches(),
                     3LL * spec.patch * spec.patch, E, {}, "patch_embed"));
  for (int b = 0; b < spec.depth; ++b) {
    auto nm = [&](const char* s) { return "b" + std::to_string(b) + "." + s; };
    int ln1 = g.add(hce(id(), K::LayerNorm, S, E, {x}, nm("ln1")));
    int rf1 = g.add(hce(id(), K::Reformat, S, E, {ln1}, nm("ln1_fmt")));
    int qkv = g.add(gemm(id(), K::MatMul, S, E, 3 * E, {rf1}, nm("qkv")));
    int tr = g.add(hce(id(), K::Transpose, S, E, {qkv}, nm("k_transpose")));
    int qk = g.add(gemm(id(), K::BatchMatMul, S, D, S, {qkv, tr}, nm("qk"),
                        int(H), 2));
    int sm = g.add(hce(id(), K::Softmax, H * S, S, {qk}, nm("softmax")));
    int rf2 = g.add(hce(id(), K::Reformat, H * S, S, {sm}, nm("softmax_fmt")));
    int av = g.add(gemm(id(), K::BatchMatMul, S, S, D, {rf2, qkv}, nm("av"),
                        int(H), 2));
    int proj = g.add(gemm(id(), K::MatMul, S, E, E, {av}, nm("proj")));
    int add1 = g.add(hce(id(), K::VectorAdd, S, E, {proj, x}, nm("residual1")));
    int ln2 = g.add(hce(id(), K::LayerNorm, S, E, {add1}, nm("ln2")));
    int rf3 = g.add(hce(id(), K::Reformat, S, E, {ln2}, nm("ln2_fmt")));
    int fc1 = g.add(gemm(id(), K::MatMul, S, E, F, {rf3}, nm("mlp_fc1")));
    int act = g.add(hce(id(), K::GeLU, S, F, {fc1}, nm("gelu")));
    int rf4 = g.add(hce(id(), K::Reformat, S, F, {act}, nm("gelu_fmt")));
    int fc2 = g.add(gemm(id(), K::MatMul, S, F, E, {rf4}, nm("mlp_fc2")));
    x = g.add(hce(id(), K::VectorAdd, S, E, {fc2, add1}, nm("residual2")));
  }
  return g;
}

/// Closed-form MAC count of build_transformer's output.
inline std::int64_t transformer_macs(const ModelSpec& s) {
  const std::int64_t S = s.seq_len, E = s.embed_dim, H = s.heads;
  const std::int64_t D = E / H, F = s.hidden_dim();
  std::int64_t block = S * E * 3 * E      // qkv
                       + 2 * H * S * D * S  // qk and av
                       + S * E * E          // proj
                       + 2 * S * E * F;     // mlp
  return s.num_patches() * 3LL * s.patch * s.patch * E + s.depth * block;
}

// Reference model shapes. LV-ViT-T uses an MLP ratio of 3.
inline ModelSpec deit_tiny() { return {"deit_t", 3, 192, 12, 197, 4.0, 16, 224}; }
inline ModelSpec deit_160() { return {"deit_160", 4, 160, 12, 197, 4.0, 16, 224}; }
inline ModelSpec deit_256() { return {"deit_256", 4, 256, 12, 197, 4.0, 16, 224}; }
inline ModelSpec lvvit_tiny() { return {"lvvit_t", 4, 240, 12, 197, 3.0, 16, 224}; }

inline std::optional<ModelSpec> builtin_model(std::string_view name) {
  for (const auto& s : {deit_tiny(), deit_160(), deit_256(), lvvit_tiny()})
    if (s.name == name) return s;
  return std::nullopt;
}

inline void to_json(nlohmann::json& j, const Layer& l) {
  j = nlohmann::json{{"id", l.id},
                     {"kind", std::string(to_string(l.kind))},
                     {"name", l.name},
                     {"m", l.m},
                     {"k", l.k},
                     {"n", l.n},
                     {"heads", l.heads},
                     {"activation_inputs", l.activation_inputs},
                     {"deps", l.deps}};
}

inline void from_json(const nlohmann::json& j, Layer& l) {
  l.id = j.at("id").get<int>();
  l.kind = layer_kind_from_string(j.at("kind").get<std::string>());
  l.name = j.value("name", std::string{});
  l.m = j.at("m").get<std::int64_t>();
  l.k = j.value("k", std::int64_t{1});
  l.n = j.at("n").get<std::int64_t>();
  l.heads = j.value("heads", 1);
  l.activation_inputs = j.value("activation_inputs", 1);
  l.deps = j.value("deps", std::vector<int>{});
}

inline nlohmann::json graph_to_json(const Graph& g) {
  return nlohmann::json(g.layers());
}

inline Graph graph_from_json(const nlohmann::json& j) {
  Graph g(j.get<std::vector<Layer>>());
  g.validate();
  return g;
}

}  // namespace ssr
