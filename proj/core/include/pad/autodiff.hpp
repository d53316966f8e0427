#pragma once

#include "pad/errors.hpp"

#include <Eigen/Dense>

#include <deque>
#include <functional>
#include <string>
#include <vector>

namespace pad::ad {

/// A named trainable (or frozen) tensor. Gradients accumulate into `grad`
/// across backward passes until zero_grad().
struct Parameter {
    std::string name;
    Eigen::MatrixXd value;
    Eigen::MatrixXd grad;

    Parameter() = default;
    Parameter(std::string n, Eigen::MatrixXd v)
        : name(std::move(n)), value(std::move(v)), grad(Eigen::MatrixXd::Zero(value.rows(), value.cols())) {}

    void zero_grad() { grad.setZero(value.rows(), value.cols()); }
    std::size_t size() const { return static_cast<std::size_t>(value.size()); }
};

class Tape;

/// Handle to a node on a Tape. Cheap to copy; valid until the tape is
/// destroyed or reset.
class Var {
public:
    Var() = default;
    const Eigen::MatrixXd& val() const;
    int rows() const { return static_cast<int>(val().rows()); }
    int cols() const { return static_cast<int>(val().cols()); }
    double scalar() const;
    bool valid() const { return tape_ != nullptr; }

private:
    friend class Tape;
    Var(Tape* tape, int id) : tape_(tape), id_(id) {}
    Tape* tape_ = nullptr;
    int id_ = -1;
};

/// Reverse-mode tape over dense double matrices. Ops append nodes whose
/// parents were created earlier, so backward() is a single reverse sweep.
/// Gradients are allocated lazily: nodes the loss never touches stay empty.
class Tape {
public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    /// Leaf whose gradient accumulates into the parameter.
    Var leaf(Parameter& p);
    /// Gradient-free input.
    Var constant(Eigen::MatrixXd value);

    Var add(Var a, Var b);
    Var sub(Var a, Var b);
    Var mul(Var a, Var b); // elementwise
    Var div(Var a, Var b); // elementwise
    Var matmul(Var a, Var b);
    Var transpose(Var a);
    Var scale(Var a, double s);
    Var add_scalar(Var a, double s);
    Var rows(Var a, int r0, int n);
    Var cols(Var a, int c0, int n);
    Var vcat(const std::vector<Var>& parts);
    Var hcat(const std::vector<Var>& parts);
    Var softmax_rows(Var a);
    Var layer_norm_rows(Var a, double eps = 1e-5);
    Var mul_rowvec(Var a, Var v); // v: 1 x C, broadcast over rows of a
    Var add_rowvec(Var a, Var v);
    Var gelu(Var a);
    Var l2_normalize_rows(Var a);
    Var sum(Var a);  // 1x1
    Var mean(Var a); // 1x1
    /// log(max(a, floor)); zero gradient inside the clamp.
    Var log_clamped(Var a, double floor);
    Var pow_scalar(Var a, double exponent);
    /// Reinterpret entries in row-major order as an r x c matrix.
    Var reshape_rowmajor(Var a, int r, int c);
    /// Separable bilinear interpolation of a 2-D field (half-pixel centres).
    Var upsample_bilinear(Var a, int out_h, int out_w);

    void backward(Var scalar_loss);

    std::size_t node_count() const { return nodes_.size(); }

private:
    friend class Var;

    struct Node {
        Eigen::MatrixXd val;
        Eigen::MatrixXd grad; // empty until touched by backward
        std::function<void(Tape&)> back;
        Parameter* param = nullptr;
    };

    Var make(Eigen::MatrixXd value, std::function<void(Tape&)> back = nullptr);
    Node& node(Var v) { return nodes_[static_cast<std::size_t>(v.id_)]; }
    const Node& node(Var v) const { return nodes_[static_cast<std::size_t>(v.id_)]; }
    void accum(int id, const Eigen::MatrixXd& g);
    bool has_grad(int id) const { return nodes_[static_cast<std::size_t>(id)].grad.size() > 0; }
    const Eigen::MatrixXd& grad_of(int id) const { return nodes_[static_cast<std::size_t>(id)].grad; }
    static void check_same_shape(const Var& a, const Var& b, const char* op);

    std::deque<Node> nodes_;
};

} // namespace pad::ad
