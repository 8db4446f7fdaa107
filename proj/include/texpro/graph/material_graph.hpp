#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "texpro/tensor/ops.hpp"
#include "texpro/tensor/tensor.hpp"

namespace texpro::mg {

enum class NodeKind { generator, filter };

// Continuous, optimizable parameter. Defaults must lie inside [lo, hi].
struct ParamSpec {
    std::string name;
    double def, lo, hi;
};

// Discrete knob (cell counts, octaves, per-node seed); never optimized.
struct SettingSpec {
    std::string name;
    int def;
};

struct NodeSpec {
    NodeKind kind;
    std::string op_name;
    std::vector<ParamSpec> params;
    std::vector<SettingSpec> settings;
    int input_arity;      // 0 for generators
    int output_channels;  // 1 or 3
};

const std::vector<NodeSpec>& node_library();
const NodeSpec* find_node_spec(const std::string& op_name);

struct GraphNode {
    std::string id;
    std::string op_name;
    std::vector<double> params;    // values in spec order, inside declared ranges
    std::vector<int> settings;     // values in spec order
    std::vector<bool> fixed;       // per param: excluded from theta when true
};

struct Edge {
    int src = -1, dst = -1;
    int slot = 0;
};

struct MaterialGraph {
    std::string name;
    std::vector<GraphNode> nodes;
    std::vector<Edge> edges;
    std::map<std::string, int> bindings;  // basecolor/normal/roughness[/metallic] -> node index
    uint64_t seed = 0;

    int node_index(const std::string& id) const;
};

struct TextureMapSet {
    tc::Tensor basecolor;  // {3,R,R}, values in [0,1]
    tc::Tensor normal;     // {3,R,R}, tangent-space encoded as (n+1)/2
    tc::Tensor roughness;  // {1,R,R}
    tc::Tensor metallic;   // {1,R,R}; undefined when the channel is unbound
    int resolution = 0;

    bool has_metallic() const { return metallic.defined(); }
};

struct ThetaLayout {
    struct Entry {
        int node = 0, param = 0;
        double lo = 0, hi = 1;
        std::string name;  // "<node id>.<param name>"
    };
    std::vector<Entry> entries;
    size_t size() const { return entries.size(); }
};

// Structural checks: known ops, unique ids, arity satisfied, acyclic,
// required bindings present. Throws texpro::Error(input) on violation.
void validate(const MaterialGraph& g);

std::vector<int> topo_order(const MaterialGraph& g);

// theta lists all non-fixed params in stable node order, mapped to
// unconstrained space by the inverse soft clamp.
std::vector<double> flatten_params(const MaterialGraph& g, ThetaLayout& layout);
void unflatten_params(MaterialGraph& g, const ThetaLayout& layout, const std::vector<double>& theta);

// Stand-alone evaluation at the stored parameter values (no gradients).
TextureMapSet evaluate(const MaterialGraph& g, int resolution, uint64_t seed);

// Tape evaluation: theta is a grad-enabled {P} leaf of unconstrained values
// matching `layout`; outputs are differentiable w.r.t. theta.
TextureMapSet evaluate(const MaterialGraph& g, const ThetaLayout& layout, const tc::Tensor& theta,
                       int resolution, uint64_t seed);

// Module-local image helpers shared with the loss/feature code.
tc::Tensor to_channels(const tc::Tensor& img, int channels);  // 1<->3 coercion
tc::Tensor saturate01(const tc::Tensor& img);                 // hard clamp, pass-through grad inside
tc::Tensor concat_channels(const std::vector<tc::Tensor>& parts);

}  // namespace texpro::mg
