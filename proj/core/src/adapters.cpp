#include "pad/adapters.hpp"

#include "pad/errors.hpp"
#include "pad/rng.hpp"

#include <algorithm>

namespace pad {

namespace {

Eigen::MatrixXd gaussian(Rng rng, int rows, int cols, double sigma) {
    Eigen::MatrixXd m(rows, cols);
    for (int i = 0; i < rows; ++i) {
        for (int j = 0; j < cols; ++j) {
            m(i, j) = sigma * rng.normal();
        }
    }
    return m;
}

} // namespace

AdapterStack make_adapter_stack(int layer_count, int token_dim, double beta, std::uint64_t seed) {
    if (layer_count < 0) throw DataError("make_adapter_stack: layer count must be >= 0");
    if (beta < 0.0 || beta > 1.0) throw DataError("make_adapter_stack: beta outside [0,1]");

    AdapterStack stack;
    stack.beta = beta;
    Rng root(seed);
    for (int i = 1; i <= layer_count; ++i) {
        const std::string prefix = "adapter.layer" + std::to_string(i);
        Adapter a;
        a.w = ad::Parameter(prefix + ".w",
                            gaussian(root.split("adapter/" + std::to_string(i) + "/w"), token_dim,
                                     token_dim, 0.02));
        a.ln_gamma = ad::Parameter(prefix + ".ln.gamma", Eigen::MatrixXd::Ones(1, token_dim));
        a.ln_beta = ad::Parameter(prefix + ".ln.beta", Eigen::MatrixXd::Zero(1, token_dim));
        stack.adapters.push_back(std::move(a));
    }
    return stack;
}

ad::Var adapt_layer(ad::Tape& tape, ad::Var f, Adapter& adapter, double beta) {
    if (beta < 0.0 || beta > 1.0) throw DataError("adapt_layer: beta outside [0,1]");
    if (f.cols() != adapter.w.value.rows()) {
        throw DataError("adapt_layer: feature dim " + std::to_string(f.cols()) +
                        " does not match adapter dim " + std::to_string(adapter.w.value.rows()));
    }
    if (beta == 0.0) return f;

    ad::Var a = tape.gelu(tape.matmul(f, tape.leaf(adapter.w)));
    a = tape.add_rowvec(tape.mul_rowvec(tape.layer_norm_rows(a), tape.leaf(adapter.ln_gamma)),
                        tape.leaf(adapter.ln_beta));
    if (beta == 1.0) return a;
    return tape.add(tape.scale(a, beta), tape.scale(f, 1.0 - beta));
}

std::map<int, Backbone::Hook> attach_hooks(AdapterStack& stack) {
    std::map<int, Backbone::Hook> hooks;
    if (stack.beta == 0.0) return hooks; // frozen pass, bit-exact
    AdapterStack* s = &stack;
    for (int i = 1; i <= stack.adapted_layers(); ++i) {
        hooks[i] = [s](ad::Tape& tape, ad::Var x, int layer) {
            return adapt_layer(tape, x, s->adapters[static_cast<std::size_t>(layer - 1)], s->beta);
        };
    }
    return hooks;
}

ProjectorBank make_projector_bank(const std::vector<int>& taps, int token_dim, int embed_dim,
                                  std::uint64_t seed) {
    if (taps.empty()) throw DataError("make_projector_bank: need at least one tap");
    if (!std::is_sorted(taps.begin(), taps.end()) ||
        std::adjacent_find(taps.begin(), taps.end()) != taps.end()) {
        throw DataError("make_projector_bank: taps must be strictly ascending");
    }
    for (int t : taps) {
        if (t < 1) throw DataError("make_projector_bank: tap indices are 1-based");
    }

    ProjectorBank bank;
    bank.taps = taps;
    Rng root(seed);
    for (int t : taps) {
        Projector p;
        p.w = ad::Parameter("projector.tap" + std::to_string(t) + ".w",
                            gaussian(root.split("projector/" + std::to_string(t) + "/w"),
                                     token_dim, embed_dim, 0.02));
        p.b = ad::Parameter("projector.tap" + std::to_string(t) + ".b",
                            Eigen::MatrixXd::Zero(1, embed_dim));
        bank.projectors.push_back(std::move(p));
    }
    return bank;
}

ad::Var aggregate_multigranularity(ad::Tape& tape, const std::vector<ad::Var>& tapped,
                                   ProjectorBank& bank) {
    if (tapped.size() != bank.projectors.size()) {
        throw DataError("aggregate_multigranularity: got " + std::to_string(tapped.size()) +
                        " features for " + std::to_string(bank.projectors.size()) + " taps");
    }
    ad::Var acc;
    for (std::size_t i = 0; i < tapped.size(); ++i) {
        if (tapped[i].rows() != tapped[0].rows()) {
            throw DataError("aggregate_multigranularity: tapped features disagree on token count");
        }
        ad::Var proj = tape.add_rowvec(tape.matmul(tapped[i], tape.leaf(bank.projectors[i].w)),
                                       tape.leaf(bank.projectors[i].b));
        acc = acc.valid() ? tape.add(acc, proj) : proj;
    }
    return tape.l2_normalize_rows(acc);
}

} // namespace pad
