#pragma once

#include "pad/autodiff.hpp"
#include "pad/backbone.hpp"

#include <map>
#include <vector>

namespace pad {

/// One per-layer adapter: F_adapt = Norm(Act(F W)), fused into the stream as
/// beta * F_adapt + (1 - beta) * F.
struct Adapter {
    ad::Parameter w;        // d x d
    ad::Parameter ln_gamma; // 1 x d
    ad::Parameter ln_beta;  // 1 x d
};

struct AdapterStack {
    std::vector<Adapter> adapters; // attached to layers 1..size()
    double beta = 0.1;

    int adapted_layers() const { return static_cast<int>(adapters.size()); }
};

AdapterStack make_adapter_stack(int layer_count, int token_dim, double beta, std::uint64_t seed);

/// beta = 0 returns F untouched (no tape ops, bit-exact frozen pass);
/// beta = 1 returns Norm(Act(F W)) alone.
ad::Var adapt_layer(ad::Tape& tape, ad::Var f, Adapter& adapter, double beta);

/// Hook map for Backbone::encode_image_layers: layers 1..L_a adapt, the rest
/// stay untouched. The stack must outlive the returned hooks.
std::map<int, Backbone::Hook> attach_hooks(AdapterStack& stack);

struct Projector {
    ad::Parameter w; // d x embed_dim
    ad::Parameter b; // 1 x embed_dim
};

struct ProjectorBank {
    std::vector<int> taps; // 1-based layer indices, ascending
    std::vector<Projector> projectors;
};

ProjectorBank make_projector_bank(const std::vector<int>& taps, int token_dim, int embed_dim,
                                  std::uint64_t seed);

/// F_MG = sum over taps of Proj_i(F~^i), L2-normalized per token.
/// `tapped` must hold the tap-layer features in tap order (N x d each).
ad::Var aggregate_multigranularity(ad::Tape& tape, const std::vector<ad::Var>& tapped,
                                   ProjectorBank& bank);

} // namespace pad
