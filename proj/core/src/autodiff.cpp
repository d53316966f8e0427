#include "pad/autodiff.hpp"

#include "pad/image.hpp"

#include <cmath>
#include <memory>
#include <numbers>

namespace pad::ad {

const Eigen::MatrixXd& Var::val() const {
    if (!tape_) {
        throw Error("Var: unbound handle");
    }
    return tape_->node(*this).val;
}

double Var::scalar() const {
    const auto& v = val();
    if (v.rows() != 1 || v.cols() != 1) {
        throw Error("Var::scalar: not a 1x1 value");
    }
    return v(0, 0);
}

Var Tape::make(Eigen::MatrixXd value, std::function<void(Tape&)> back) {
    nodes_.push_back(Node{std::move(value), {}, std::move(back), nullptr});
    return Var(this, static_cast<int>(nodes_.size()) - 1);
}

void Tape::accum(int id, const Eigen::MatrixXd& g) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (n.grad.size() == 0) {
        n.grad = g;
    } else {
        n.grad += g;
    }
}

void Tape::check_same_shape(const Var& a, const Var& b, const char* op) {
    if (a.val().rows() != b.val().rows() || a.val().cols() != b.val().cols()) {
        throw Error(std::string(op) + ": shape mismatch");
    }
}

Var Tape::leaf(Parameter& p) {
    Var v = make(p.value);
    node(v).param = &p;
    const int id = v.id_;
    node(v).back = [id](Tape& t) {
        Node& n = t.nodes_[static_cast<std::size_t>(id)];
        if (n.grad.size() > 0 && n.param != nullptr) {
            n.param->grad += n.grad;
        }
    };
    return v;
}

Var Tape::constant(Eigen::MatrixXd value) {
    return make(std::move(value));
}

Var Tape::add(Var a, Var b) {
    check_same_shape(a, b, "add");
    Var out = make(a.val() + b.val());
    const int oa = a.id_, ob = b.id_, oo = out.id_;
    node(out).back = [oa, ob, oo](Tape& t) {
        if (!t.has_grad(oo)) return;
        t.accum(oa, t.grad_of(oo));
        t.accum(ob, t.grad_of(oo));
    };
    return out;
}

Var Tape::sub(Var a, Var b) {
    check_same_shape(a, b, "sub");
    Var out = make(a.val() - b.val());
    const int oa = a.id_, ob = b.id_, oo = out.id_;
    node(out).back = [oa, ob, oo](Tape& t) {
        if (!t.has_grad(oo)) return;
        t.accum(oa, t.grad_of(oo));
        t.accum(ob, -t.grad_of(oo));
    };
    return out;
}

Var Tape::mul(Var a, Var b) {
    check_same_shape(a, b, "mul");
    Var out = make(a.val().cwiseProduct(b.val()));
    const int oa = a.id_, ob = b.id_, oo = out.id_;
    node(out).back = [oa, ob, oo](Tape& t) {
        if (!t.has_grad(oo)) return;
        const auto& g = t.grad_of(oo);
        t.accum(oa, g.cwiseProduct(t.nodes_[ob].val));
        t.accum(ob, g.cwiseProduct(t.nodes_[oa].val));
    };
    return out;
}

Var Tape::div(Var a, Var b) {
    check_same_shape(a, b, "div");
    Var out = make(a.val().cwiseQuotient(b.val()));
    const int oa = a.id_, ob = b.id_, oo = out.id_;
    node(out).back = [oa, ob, oo](Tape& t) {
        if (!t.has_grad(oo)) return;
        const auto& g = t.grad_of(oo);
        const auto& bv = t.nodes_[ob].val;
        const auto& ov = t.nodes_[oo].val;
        t.accum(oa, g.cwiseQuotient(bv));
        t.accum(ob, -g.cwiseProduct(ov).cwiseQuotient(bv));
    };
    return out;
}

Var Tape::matmul(Var a, Var b) {
    if (a.val().cols() != b.val().rows()) {
        throw Error("matmul: inner dimension mismatch");
    }
    Var out = make(a.val() * b.val());
    const int oa = a.id_, ob = b.id_, oo = out.id_;
    node(out).back = [oa, ob, oo](Tape& t) {
        if (!t.has_grad(oo)) return;
        const auto& g = t.grad_of(oo);
        t.accum(oa, g * t.nodes_[ob].val.transpose());
        t.accum(ob, t.nodes_[oa].val.transpose() * g);
    };
    return out;
}

Var Tape::transpose(Var a) {
    Var out = make(a.val().transpose());
    const int oa = a.id_, oo = out.id_;
    node(out).back = [oa, oo](Tape& t) {
        if (!t.has_grad(oo)) return;
        t.accum(oa, t.grad_of(oo).transpose());
    };
    return out;
}

Var Tape::scale(Var a, double s) {
    Var out = make(a.val() * s);
    const int oa = a.id_, oo = out.id_;
    node(out).back = [oa, oo, s](Tape& t) {
        if (!t.has_grad(oo)) return;
        t.accum(oa, t.grad_of(oo) * s);
    };
    return out;
}

Var Tape::add_scalar(Var a, double s) {
    Var out = make(a.val().array() + s);
    const int oa = a.id_, oo = out.id_;
    node(out).back = [oa, oo](Tape& t) {
        if (!t.has_grad(oo)) return;
        t.accum(oa, t.grad_of(oo));
    };
    return out;
}

Var Tape::rows(Var a, int r0, int n) {
    if (r0 < 0 || n < 0 || r0 + n > a.val().rows()) {
        throw Error("rows: slice out of range");
    }
    Var out = make(a.val().middleRows(r0, n));
    const int oa = a.id_, oo = out.id_;
    node(out).back = [oa, oo, r0, n](Tape& t) {
        if (!t.has_grad(oo)) return;
        const auto& av = t.nodes_[oa].val;
        Eigen::MatrixXd g = Eigen::MatrixXd::Zero(av.rows(), av.cols());
        g.middleRows(r0, n) = t.grad_of(oo);
        t.accum(oa, g);
    };
    return out;
}

Var Tape::cols(Var a, int c0, int n) {
    if (c0 < 0 || n < 0 || c0 + n > a.val().cols()) {
        throw Error("cols: slice out of range");
    }
    Var out = make(a.val().middleCols(c0, n));
    const int oa = a.id_, oo = out.id_;
    node(out).back = [oa, oo, c0, n](Tape& t) {
        if (!t.has_grad(oo)) return;
        const auto& av = t.nodes_[oa].val;
        Eigen::MatrixXd g = Eigen::MatrixXd::Zero(av.rows(), av.cols());
        g.middleCols(c0, n) = t.grad_of(oo);
        t.accum(oa, g);
    };
    return out;
}

Var Tape::vcat(const std::vector<Var>& parts) {
    if (parts.empty()) {
        throw Error("vcat: empty");
    }
    Eigen::Index total_rows = 0;
    const Eigen::Index cols = parts.front().val().cols();
    for (const auto& p : parts) {
        if (p.val().cols() != cols) {
            throw Error("vcat: column mismatch");
        }
        total_rows += p.val().rows();
    }
    Eigen::MatrixXd stacked(total_rows, cols);
    Eigen::Index r = 0;
    std::vector<int> ids;
    std::vector<int> row_counts;
    ids.reserve(parts.size());
    for (const auto& p : parts) {
        stacked.middleRows(r, p.val().rows()) = p.val();
        r += p.val().rows();
        ids.push_back(p.id_);
        row_counts.push_back(static_cast<int>(p.val().rows()));
    }
    Var out = make(std::move(stacked));
    const int oo = out.id_;
    node(out).back = [ids, row_counts, oo](Tape& t) {
        if (!t.has_grad(oo)) return;
        const auto& g = t.grad_of(oo);
        int r0 = 0;
        for (std::size_t i = 0; i < ids.size(); ++i) {
            t.accum(ids[i], g.middleRows(r0, row_counts[i]));
            r0 += row_counts[i];
        }
    };
    return out;
}

Var Tape::hcat(const std::vector<Var>& parts) {
    if (parts.empty()) {
        throw Error("hcat: empty");
    }
    Eigen::Index total_cols = 0;
    const Eigen::Index rows = parts.front().val().rows();
    for (const auto& p : parts) {
        if (p.val().rows() != rows) {
            throw Error("hcat: row mismatch");
        }
        total_cols += p.val().cols();
    }
    Eigen::MatrixXd stacked(rows, total_cols);
    Eigen::Index c = 0;
    std::vector<int> ids;
    std::vector<int> col_counts;
    for (const auto& p : parts) {
        stacked.middleCols(c, p.val().cols()) = p.val();
        c += p.val().cols();
        ids.push_back(p.id_);
        col_counts.push_back(static_cast<int>(p.val().cols()));
    }
    Var out = make(std::move(stacked));
    const int oo = out.id_;
    node(out).back = [ids, col_counts, oo](Tape& t) {
        if (!t.has_grad(oo)) return;
        const auto& g = t.grad_of(oo);
        int c0 = 0;
        for (std::size_t i = 0; i < ids.size(); ++i) {
            t.accum(ids[i], g.middleCols(c0, col_counts[i]));
            c0 += col_counts[i];
        }
    };
    return out;
}

Var Tape::softmax_rows(Var a) {
    Eigen::MatrixXd y = a.val();
    for (Eigen::Index i = 0; i < y.rows(); ++i) {
        const double m = y.row(i).maxCoeff();
        y.row(i) = (y.row(i).array() - m).exp();
        y.row(i) /= y.row(i).sum();
    }
    Var out = make(std::move(y));
    const int oa = a.id_, oo = out.id_;
    node(out).back = [oa, oo](Tape& t) {
        if (!t.has_grad(oo)) return;
        const auto& g = t.grad_of(oo);
        const auto& yv = t.nodes_[oo].val;
        Eigen::MatrixXd dx(yv.rows(), yv.cols());
        for (Eigen::Index i = 0; i < yv.rows(); ++i) {
            const double dot = g.row(i).cwiseProduct(yv.row(i)).sum();
            dx.row(i) = yv.row(i).array() * (g.row(i).array() - dot);
        }
        t.accum(oa, dx);
    };
    return out;
}

Var Tape::layer_norm_rows(Var a, double eps) {
    const auto& x = a.val();
    const Eigen::Index c = x.cols();
    Eigen::MatrixXd y(x.rows(), c);
    Eigen::VectorXd inv_std(x.rows());
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        const double mu = x.row(i).mean();
        const double var = (x.row(i).array() - mu).square().mean();
        const double s = 1.0 / std::sqrt(var + eps);
        inv_std(i) = s;
        y.row(i) = (x.row(i).array() - mu) * s;
    }
    Var out = make(std::move(y));
    const int oa = a.id_, oo = out.id_;
    auto istd = std::make_shared<Eigen::VectorXd>(std::move(inv_std));
    node(out).back = [oa, oo, istd](Tape& t) {
        if (!t.has_grad(oo)) return;
        const auto& g = t.grad_of(oo);
        const auto& yv = t.nodes_[oo].val;
        const double n = static_cast<double>(yv.cols());
        Eigen::MatrixXd dx(yv.rows(), yv.cols());
        for (Eigen::Index i = 0; i < yv.rows(); ++i) {
            const double gmean = g.row(i).mean();
            const double gy = g.row(i).cwiseProduct(yv.row(i)).sum() / n;
            dx.row(i) = (*istd)(i) * (g.row(i).array() - gmean - yv.row(i).array() * gy);
        }
        t.accum(oa, dx);
    };
    return out;
}

Var Tape::mul_rowvec(Var a, Var v) {
    if (v.val().rows() != 1 || v.val().cols() != a.val().cols()) {
        throw Error("mul_rowvec: expected 1 x cols(a)");
    }
    Eigen::MatrixXd y = a.val().array().rowwise() * v.val().row(0).array();
    Var out = make(std::move(y));
    const int oa = a.id_, ov = v.id_, oo = out.id_;
    node(out).back = [oa, ov, oo](Tape& t) {
        if (!t.has_grad(oo)) return;
        const auto& g = t.grad_of(oo);
        const auto& av = t.nodes_[oa].val;
        const auto& vv = t.nodes_[ov].val;
        t.accum(oa, g.array().rowwise() * vv.row(0).array());
        t.accum(ov, g.cwiseProduct(av).colwise().sum());
    };
    return out;
}

Var Tape::add_rowvec(Var a, Var v) {
    if (v.val().rows() != 1 || v.val().cols() != a.val().cols()) {
        throw Error("add_rowvec: expected 1 x cols(a)");
    }
    Eigen::MatrixXd y = a.val().array().rowwise() + v.val().row(0).array();
    Var out = make(std::move(y));
    const int oa = a.id_, ov = v.id_, oo = out.id_;
    node(out).back = [oa, ov, oo](Tape& t) {
        if (!t.has_grad(oo)) return;
        const auto& g = t.grad_of(oo);
        t.accum(oa, g);
        t.accum(ov, g.colwise().sum());
    };
    return out;
}

namespace {
inline double gauss_cdf(double x) {
    return 0.5 * (1.0 + std::erf(x / std::numbers::sqrt2));
}
} // namespace

Var Tape::gelu(Var a) {
    const auto& x = a.val();
    Eigen::MatrixXd y = x.array() * x.unaryExpr(&gauss_cdf).array();
    Var out = make(std::move(y));
    const int oa = a.id_, oo = out.id_;
    node(out).back = [oa, oo](Tape& t) {
        if (!t.has_grad(oo)) return;
        const auto& g = t.grad_of(oo);
        const auto& x = t.nodes_[oa].val;
        const double inv_sqrt2pi = 1.0 / std::sqrt(2.0 * std::numbers::pi);
        Eigen::ArrayXXd cdf = x.unaryExpr(&gauss_cdf).array();
        Eigen::ArrayXXd pdf = inv_sqrt2pi * (-0.5 * x.array().square()).exp();
        t.accum(oa, (g.array() * (cdf + x.array() * pdf)).matrix());
    };
    return out;
}

Var Tape::l2_normalize_rows(Var a) {
    const auto& x = a.val();
    constexpr double kEps = 1e-24;
    Eigen::VectorXd inv_norm(x.rows());
    Eigen::MatrixXd y(x.rows(), x.cols());
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        const double n = std::sqrt(x.row(i).squaredNorm() + kEps);
        inv_norm(i) = 1.0 / n;
        y.row(i) = x.row(i) * inv_norm(i);
    }
    Var out = make(std::move(y));
    const int oa = a.id_, oo = out.id_;
    auto inv = std::make_shared<Eigen::VectorXd>(std::move(inv_norm));
    node(out).back = [oa, oo, inv](Tape& t) {
        if (!t.has_grad(oo)) return;
        const auto& g = t.grad_of(oo);
        const auto& yv = t.nodes_[oo].val;
        Eigen::MatrixXd dx(yv.rows(), yv.cols());
        for (Eigen::Index i = 0; i < yv.rows(); ++i) {
            const double dot = g.row(i).cwiseProduct(yv.row(i)).sum();
            dx.row(i) = (g.row(i) - yv.row(i) * dot) * (*inv)(i);
        }
        t.accum(oa, dx);
    };
    return out;
}

Var Tape::sum(Var a) {
    Eigen::MatrixXd y(1, 1);
    y(0, 0) = a.val().sum();
    Var out = make(std::move(y));
    const int oa = a.id_, oo = out.id_;
    node(out).back = [oa, oo](Tape& t) {
        if (!t.has_grad(oo)) return;
        const auto& av = t.nodes_[oa].val;
        t.accum(oa, Eigen::MatrixXd::Constant(av.rows(), av.cols(), t.grad_of(oo)(0, 0)));
    };
    return out;
}

Var Tape::mean(Var a) {
    const double inv_n = 1.0 / static_cast<double>(a.val().size());
    return scale(sum(a), inv_n);
}

Var Tape::log_clamped(Var a, double floor) {
    const auto& x = a.val();
    Eigen::MatrixXd y = x.array().max(floor).log();
    Var out = make(std::move(y));
    const int oa = a.id_, oo = out.id_;
    node(out).back = [oa, oo, floor](Tape& t) {
        if (!t.has_grad(oo)) return;
        const auto& g = t.grad_of(oo);
        const auto& x = t.nodes_[oa].val;
        Eigen::ArrayXXd mask = (x.array() > floor).cast<double>();
        t.accum(oa, (g.array() * mask / x.array().max(floor)).matrix());
    };
    return out;
}

Var Tape::pow_scalar(Var a, double exponent) {
    const auto& x = a.val();
    Eigen::MatrixXd y = x.array().pow(exponent);
    Var out = make(std::move(y));
    const int oa = a.id_, oo = out.id_;
    node(out).back = [oa, oo, exponent](Tape& t) {
        if (!t.has_grad(oo)) return;
        const auto& g = t.grad_of(oo);
        const auto& x = t.nodes_[oa].val;
        Eigen::ArrayXXd d = exponent * x.array().pow(exponent - 1.0);
        t.accum(oa, (g.array() * d).matrix());
    };
    return out;
}

Var Tape::reshape_rowmajor(Var a, int r, int c) {
    const auto& x = a.val();
    if (static_cast<Eigen::Index>(r) * c != x.size()) {
        throw Error("reshape_rowmajor: element count mismatch");
    }
    Eigen::MatrixXd y(r, c);
    Eigen::Index flat = 0;
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        for (Eigen::Index j = 0; j < x.cols(); ++j, ++flat) {
            y(flat / c, flat % c) = x(i, j);
        }
    }
    Var out = make(std::move(y));
    const int oa = a.id_, oo = out.id_;
    node(out).back = [oa, oo](Tape& t) {
        if (!t.has_grad(oo)) return;
        const auto& g = t.grad_of(oo);
        const auto& x = t.nodes_[oa].val;
        Eigen::MatrixXd dx(x.rows(), x.cols());
        const Eigen::Index c = g.cols();
        Eigen::Index flat = 0;
        for (Eigen::Index i = 0; i < dx.rows(); ++i) {
            for (Eigen::Index j = 0; j < dx.cols(); ++j, ++flat) {
                dx(i, j) = g(flat / c, flat % c);
            }
        }
        t.accum(oa, dx);
    };
    return out;
}

Var Tape::upsample_bilinear(Var a, int out_h, int out_w) {
    if (out_h < 1 || out_w < 1) {
        throw Error("upsample_bilinear: degenerate target size");
    }
    auto wr = std::make_shared<Eigen::MatrixXd>(
        bilinear_weight_matrix(static_cast<int>(a.val().rows()), out_h));
    auto wc = std::make_shared<Eigen::MatrixXd>(
        bilinear_weight_matrix(static_cast<int>(a.val().cols()), out_w));
    Var out = make((*wr) * a.val() * wc->transpose());
    const int oa = a.id_, oo = out.id_;
    node(out).back = [oa, oo, wr, wc](Tape& t) {
        if (!t.has_grad(oo)) return;
        t.accum(oa, wr->transpose() * t.grad_of(oo) * (*wc));
    };
    return out;
}

void Tape::backward(Var scalar_loss) {
    if (scalar_loss.tape_ != this) {
        throw Error("backward: loss from another tape");
    }
    Node& loss = node(scalar_loss);
    if (loss.val.rows() != 1 || loss.val.cols() != 1) {
        throw Error("backward: loss must be 1x1");
    }
    loss.grad = Eigen::MatrixXd::Ones(1, 1);
    for (int i = scalar_loss.id_; i >= 0; --i) {
        Node& n = nodes_[static_cast<std::size_t>(i)];
        if (n.back && n.grad.size() > 0) {
            n.back(*this);
        }
    }
}

} // namespace pad::ad
