#include "lsar/autodiff.hpp"

#include <cmath>
#include <stdexcept>
#include <utility>

namespace lsar {

Var Tape::push(Mat val, std::function<void(Tape&)> back, Param* bound) {
    Node n;
    n.grad = Mat::Zero(val.rows(), val.cols());
    n.val = std::move(val);
    n.back = std::move(back);
    n.bound = bound;
    nodes_.push_back(std::move(n));
    return Var{static_cast<int>(nodes_.size()) - 1};
}

Var Tape::constant(Mat v) { return push(std::move(v)); }

Var Tape::param(Param& p) { return push(p.value, {}, &p); }

Var Tape::add(Var a, Var b) {
    Var out = push(val(a) + val(b));
    int oi = out.i;
    nodes_[oi].back = [a, b, oi](Tape& t) {
        t.nodes_[a.i].grad += t.nodes_[oi].grad;
        t.nodes_[b.i].grad += t.nodes_[oi].grad;
    };
    return out;
}

Var Tape::sub(Var a, Var b) {
    Var out = push(val(a) - val(b));
    int oi = out.i;
    nodes_[oi].back = [a, b, oi](Tape& t) {
        t.nodes_[a.i].grad += t.nodes_[oi].grad;
        t.nodes_[b.i].grad -= t.nodes_[oi].grad;
    };
    return out;
}

Var Tape::mul(Var a, Var b) {
    Var out = push(val(a).cwiseProduct(val(b)));
    int oi = out.i;
    nodes_[oi].back = [a, b, oi](Tape& t) {
        t.nodes_[a.i].grad += t.nodes_[oi].grad.cwiseProduct(t.nodes_[b.i].val);
        t.nodes_[b.i].grad += t.nodes_[oi].grad.cwiseProduct(t.nodes_[a.i].val);
    };
    return out;
}

Var Tape::scale(Var a, double c) {
    Var out = push(val(a) * c);
    int oi = out.i;
    nodes_[oi].back = [a, c, oi](Tape& t) { t.nodes_[a.i].grad += c * t.nodes_[oi].grad; };
    return out;
}

Var Tape::exp(Var a) {
    Var out = push(val(a).array().exp().matrix());
    int oi = out.i;
    nodes_[oi].back = [a, oi](Tape& t) {
        t.nodes_[a.i].grad += t.nodes_[oi].grad.cwiseProduct(t.nodes_[oi].val);
    };
    return out;
}

Var Tape::square(Var a) {
    Var out = push(val(a).cwiseProduct(val(a)));
    int oi = out.i;
    nodes_[oi].back = [a, oi](Tape& t) {
        t.nodes_[a.i].grad += 2.0 * t.nodes_[oi].grad.cwiseProduct(t.nodes_[a.i].val);
    };
    return out;
}

Var Tape::gelu(Var a) {
    Var out = push(val(a).unaryExpr([](double x) { return gelu_scalar(x); }));
    int oi = out.i;
    nodes_[oi].back = [a, oi](Tape& t) {
        t.nodes_[a.i].grad += t.nodes_[oi].grad.cwiseProduct(
            t.nodes_[a.i].val.unaryExpr([](double x) { return gelu_grad_scalar(x); }));
    };
    return out;
}

Var Tape::matmul(Var a, Var b) {
    Var out = push(val(a) * val(b));
    int oi = out.i;
    nodes_[oi].back = [a, b, oi](Tape& t) {
        t.nodes_[a.i].grad += t.nodes_[oi].grad * t.nodes_[b.i].val.transpose();
        t.nodes_[b.i].grad += t.nodes_[a.i].val.transpose() * t.nodes_[oi].grad;
    };
    return out;
}

Var Tape::matmul_nt(Var a, Var b) {
    Var out = push(val(a) * val(b).transpose());
    int oi = out.i;
    nodes_[oi].back = [a, b, oi](Tape& t) {
        t.nodes_[a.i].grad += t.nodes_[oi].grad * t.nodes_[b.i].val;
        t.nodes_[b.i].grad += t.nodes_[oi].grad.transpose() * t.nodes_[a.i].val;
    };
    return out;
}

Var Tape::add_row(Var a, Var row) {
    if (val(row).rows() != 1 || val(row).cols() != val(a).cols())
        throw std::invalid_argument("add_row: row must be 1 x cols(a)");
    Mat v = val(a);
    v.rowwise() += RowVec(val(row));
    Var out = push(std::move(v));
    int oi = out.i;
    nodes_[oi].back = [a, row, oi](Tape& t) {
        t.nodes_[a.i].grad += t.nodes_[oi].grad;
        t.nodes_[row.i].grad += t.nodes_[oi].grad.colwise().sum();
    };
    return out;
}

Var Tape::concat_rows(const std::vector<Var>& parts) {
    Eigen::Index rows = 0;
    const Eigen::Index cols = val(parts.front()).cols();
    for (Var p : parts) rows += val(p).rows();
    Mat v(rows, cols);
    Eigen::Index at = 0;
    for (Var p : parts) {
        v.middleRows(at, val(p).rows()) = val(p);
        at += val(p).rows();
    }
    Var out = push(std::move(v));
    int oi = out.i;
    std::vector<Var> ps = parts;
    nodes_[oi].back = [ps, oi](Tape& t) {
        Eigen::Index at = 0;
        for (Var p : ps) {
            const Eigen::Index r = t.nodes_[p.i].val.rows();
            t.nodes_[p.i].grad += t.nodes_[oi].grad.middleRows(at, r);
            at += r;
        }
    };
    return out;
}

Var Tape::concat_cols(const std::vector<Var>& parts) {
    Eigen::Index cols = 0;
    const Eigen::Index rows = val(parts.front()).rows();
    for (Var p : parts) cols += val(p).cols();
    Mat v(rows, cols);
    Eigen::Index at = 0;
    for (Var p : parts) {
        v.middleCols(at, val(p).cols()) = val(p);
        at += val(p).cols();
    }
    Var out = push(std::move(v));
    int oi = out.i;
    std::vector<Var> ps = parts;
    nodes_[oi].back = [ps, oi](Tape& t) {
        Eigen::Index at = 0;
        for (Var p : ps) {
            const Eigen::Index c = t.nodes_[p.i].val.cols();
            t.nodes_[p.i].grad += t.nodes_[oi].grad.middleCols(at, c);
            at += c;
        }
    };
    return out;
}

Var Tape::slice_rows(Var a, int start, int count) {
    Var out = push(val(a).middleRows(start, count));
    int oi = out.i;
    nodes_[oi].back = [a, start, count, oi](Tape& t) {
        t.nodes_[a.i].grad.middleRows(start, count) += t.nodes_[oi].grad;
    };
    return out;
}

Var Tape::slice_cols(Var a, int start, int count) {
    Var out = push(val(a).middleCols(start, count));
    int oi = out.i;
    nodes_[oi].back = [a, start, count, oi](Tape& t) {
        t.nodes_[a.i].grad.middleCols(start, count) += t.nodes_[oi].grad;
    };
    return out;
}

Var Tape::gather_rows(Var table, std::vector<int> idx) {
    Mat v(static_cast<Eigen::Index>(idx.size()), val(table).cols());
    for (size_t i = 0; i < idx.size(); ++i) v.row(static_cast<Eigen::Index>(i)) = val(table).row(idx[i]);
    Var out = push(std::move(v));
    int oi = out.i;
    nodes_[oi].back = [table, idx = std::move(idx), oi](Tape& t) {
        for (size_t i = 0; i < idx.size(); ++i)
            t.nodes_[table.i].grad.row(idx[i]) += t.nodes_[oi].grad.row(static_cast<Eigen::Index>(i));
    };
    return out;
}

Var Tape::mean_rows(Var a) {
    const double inv = 1.0 / static_cast<double>(val(a).rows());
    Var out = push(val(a).colwise().sum() * inv);
    int oi = out.i;
    nodes_[oi].back = [a, inv, oi](Tape& t) {
        t.nodes_[a.i].grad.rowwise() += RowVec(t.nodes_[oi].grad * inv);
    };
    return out;
}

Var Tape::sum(Var a) {
    Mat v(1, 1);
    v(0, 0) = val(a).sum();
    Var out = push(std::move(v));
    int oi = out.i;
    nodes_[oi].back = [a, oi](Tape& t) {
        t.nodes_[a.i].grad.array() += t.nodes_[oi].grad(0, 0);
    };
    return out;
}

Var Tape::masked_softmax(Var scores, std::vector<std::vector<uint8_t>> allow) {
    const Mat& s = val(scores);
    Mat p = Mat::Zero(s.rows(), s.cols());
    for (Eigen::Index r = 0; r < s.rows(); ++r) {
        const auto& row_allow = allow[static_cast<size_t>(r)];
        // max over allowed keys only: masked scores never enter the arithmetic
        double mx = -std::numeric_limits<double>::infinity();
        for (Eigen::Index k = 0; k < s.cols(); ++k)
            if (row_allow[static_cast<size_t>(k)] && s(r, k) > mx) mx = s(r, k);
        if (!std::isfinite(mx)) throw std::invalid_argument("masked_softmax: fully masked row");
        double denom = 0.0;
        for (Eigen::Index k = 0; k < s.cols(); ++k) {
            if (!row_allow[static_cast<size_t>(k)]) continue;
            const double e = std::exp(s(r, k) - mx);
            p(r, k) = e;
            denom += e;
        }
        for (Eigen::Index k = 0; k < s.cols(); ++k)
            if (row_allow[static_cast<size_t>(k)]) p(r, k) /= denom;
    }
    Var out = push(std::move(p));
    int oi = out.i;
    nodes_[oi].back = [scores, oi](Tape& t) {
        const Mat& pv = t.nodes_[oi].val;
        const Mat& g = t.nodes_[oi].grad;
        for (Eigen::Index r = 0; r < pv.rows(); ++r) {
            const double dot = pv.row(r).dot(g.row(r));
            t.nodes_[scores.i].grad.row(r) +=
                pv.row(r).cwiseProduct(g.row(r) - RowVec::Constant(pv.cols(), dot));
        }
    };
    return out;
}

Var Tape::softmax_rows(Var scores) {
    std::vector<std::vector<uint8_t>> allow(
        static_cast<size_t>(val(scores).rows()),
        std::vector<uint8_t>(static_cast<size_t>(val(scores).cols()), 1));
    return masked_softmax(scores, std::move(allow));
}

Var Tape::layernorm(Var x, Var gamma, Var beta, double eps) {
    const Mat& xv = val(x);
    Mat xhat(xv.rows(), xv.cols());
    Eigen::VectorXd inv_std(xv.rows());
    for (Eigen::Index r = 0; r < xv.rows(); ++r) {
        const double mean = xv.row(r).mean();
        const double var = (xv.row(r).array() - mean).square().mean();
        const double is = 1.0 / std::sqrt(var + eps);
        xhat.row(r) = (xv.row(r).array() - mean).matrix() * is;
        inv_std(r) = is;
    }
    Mat y = xhat;
    y.array().rowwise() *= val(gamma).row(0).array();
    y.rowwise() += RowVec(val(beta));
    Var out = push(std::move(y));
    int oi = out.i;
    nodes_[oi].back = [x, gamma, beta, xhat = std::move(xhat), inv_std = std::move(inv_std), oi](Tape& t) {
        const Mat& g = t.nodes_[oi].grad;
        const RowVec gam = t.nodes_[gamma.i].val.row(0);
        const Eigen::Index cols = g.cols();
        for (Eigen::Index r = 0; r < g.rows(); ++r) {
            const RowVec gg = g.row(r).cwiseProduct(gam);
            const double m1 = gg.mean();
            const double m2 = gg.cwiseProduct(xhat.row(r)).mean();
            t.nodes_[x.i].grad.row(r) +=
                inv_std(r) * (gg - RowVec::Constant(cols, m1) - xhat.row(r) * m2);
        }
        t.nodes_[gamma.i].grad += g.cwiseProduct(xhat).colwise().sum();
        t.nodes_[beta.i].grad += g.colwise().sum();
    };
    return out;
}

Var Tape::cross_entropy_mean(Var logits, std::vector<int> targets) {
    const Mat& l = val(logits);
    if (static_cast<Eigen::Index>(targets.size()) != l.rows())
        throw std::invalid_argument("cross_entropy_mean: one target per row required");
    Mat probs(l.rows(), l.cols());
    double total = 0.0;
    for (Eigen::Index r = 0; r < l.rows(); ++r) {
        const double mx = l.row(r).maxCoeff();
        const Eigen::ArrayXd e = (l.row(r).array() - mx).exp();
        const double denom = e.sum();
        probs.row(r) = (e / denom).matrix().transpose();
        total += -(l(r, targets[static_cast<size_t>(r)]) - mx - std::log(denom));
    }
    Mat v(1, 1);
    v(0, 0) = total / static_cast<double>(l.rows());
    Var out = push(std::move(v));
    int oi = out.i;
    nodes_[oi].back = [logits, targets = std::move(targets), probs = std::move(probs), oi](Tape& t) {
        const double w = t.nodes_[oi].grad(0, 0) / static_cast<double>(probs.rows());
        Mat d = probs;
        for (Eigen::Index r = 0; r < d.rows(); ++r) d(r, targets[static_cast<size_t>(r)]) -= 1.0;
        t.nodes_[logits.i].grad += w * d;
    };
    return out;
}

void Tape::backward(Var loss) {
    if (nodes_[loss.i].val.rows() != 1 || nodes_[loss.i].val.cols() != 1)
        throw std::invalid_argument("backward: loss must be 1x1");
    nodes_[loss.i].grad(0, 0) = 1.0;
    for (int i = loss.i; i >= 0; --i) {
        if (nodes_[i].back) nodes_[i].back(*this);
    }
    for (auto& n : nodes_) {
        if (n.bound) n.bound->grad += n.grad;
    }
}

}  // namespace lsar
