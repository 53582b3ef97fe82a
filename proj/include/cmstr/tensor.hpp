// Copyright 2026 The cmstr Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "cmstr/errors.hpp"
#include "cmstr/rng.hpp"

namespace cmstr {

// Reverse-mode tape engine over dense row-major Eigen matrices.
//
// Everything the model touches is a rank-2 tensor; vectors are 1xN rows.
// Ops are free functions: they compute the forward value eagerly and, when a
// tape is supplied and an input wants gradients, push one backward closure
// onto it. Tape::backward replays the closures in exact reverse order.
// Storage is templated on scalar: float is the production type, double backs
// the finite-difference oracles. Reductions (softmax, layer norm, losses)
// accumulate in double regardless of the storage scalar.
//
// Threading: an op writes only to its own output and, during backward, to the
// gradients of its inputs. Concurrent use is safe only when each thread owns
// its tape and the threads share no gradient-accumulating tensors, i.e.
// forward-only evaluation over shared frozen weights.

template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using MatF = Mat<float>;
using MatD = Mat<double>;

template <typename Scalar>
struct TensorT {
    Mat<Scalar> value;
    Mat<Scalar> grad;  // empty until a backward pass touches this tensor
    bool requires_grad = false;
    std::string name;  // parameters carry names for diagnostics and checkpoints

    TensorT() = default;
    explicit TensorT(Mat<Scalar> v, bool rg = false, std::string n = {})
        : value(std::move(v)), requires_grad(rg), name(std::move(n)) {}

    Eigen::Index rows() const { return value.rows(); }
    Eigen::Index cols() const { return value.cols(); }
    Eigen::Index size() const { return value.size(); }

    void ensure_grad() {
        if (grad.rows() != value.rows() || grad.cols() != value.cols()) {
            grad = Mat<Scalar>::Zero(value.rows(), value.cols());
        }
    }

    void zero_grad() {
        if (grad.size() != 0) grad.setZero();
    }
};

template <typename Scalar>
using TensorPtr = std::shared_ptr<TensorT<Scalar>>;

template <typename Scalar>
TensorPtr<Scalar> tensor(Mat<Scalar> value, bool requires_grad = false,
                         std::string name = {}) {
    return std::make_shared<TensorT<Scalar>>(std::move(value), requires_grad,
                                             std::move(name));
}

template <typename Scalar>
TensorPtr<Scalar> tensor_zeros(Eigen::Index r, Eigen::Index c,
                               bool requires_grad = false, std::string name = {}) {
    return tensor<Scalar>(Mat<Scalar>::Zero(r, c), requires_grad, std::move(name));
}

template <typename Scalar>
class TapeT {
public:
    void record(std::function<void()> backward_fn) {
        records_.push_back(std::move(backward_fn));
    }

    // Seeds d(loss)/d(loss) = seed and replays all recorded closures newest
    // first. The loss must be a 1x1 tensor produced through this tape.
    void backward(const TensorPtr<Scalar>& loss, Scalar seed = Scalar(1)) {
        if (loss->size() != 1) {
            throw ContractError("backward expects a scalar loss, got " +
                                std::to_string(loss->rows()) + "x" +
                                std::to_string(loss->cols()));
        }
        loss->ensure_grad();
        loss->grad(0, 0) += seed;
        for (auto it = records_.rbegin(); it != records_.rend(); ++it) (*it)();
    }

    std::size_t size() const { return records_.size(); }
    void clear() { records_.clear(); }

private:
    std::vector<std::function<void()>> records_;
};

using Tensor = TensorT<float>;
using Tape = TapeT<float>;
using TensorP = TensorPtr<float>;

namespace detail {

template <typename Scalar>
bool track(TapeT<Scalar>* tape, std::initializer_list<const TensorPtr<Scalar>*> ins) {
    if (tape == nullptr) return false;
    for (const auto* t : ins) {
        if (*t && (*t)->requires_grad) return true;
    }
    return false;
}

inline std::string shape_str(Eigen::Index r, Eigen::Index c) {
    return std::to_string(r) + "x" + std::to_string(c);
}

template <typename Scalar>
void want_shape(const TensorPtr<Scalar>& t, const char* op, Eigen::Index r,
                Eigen::Index c) {
    if (t->rows() != r || t->cols() != c) {
        throw ContractError(std::string(op) + ": expected " + shape_str(r, c) +
                            ", got " + shape_str(t->rows(), t->cols()));
    }
}

}  // namespace detail

// ---------------------------------------------------------------- products

template <typename Scalar>
TensorPtr<Scalar> matmul(TapeT<Scalar>* tape, const TensorPtr<Scalar>& a,
                         const TensorPtr<Scalar>& b) {
    if (a->cols() != b->rows()) {
        throw ContractError("matmul: inner dims disagree, " +
                            detail::shape_str(a->rows(), a->cols()) + " * " +
                            detail::shape_str(b->rows(), b->cols()));
    }
    auto out = tensor<Scalar>(a->value * b->value);
    if (detail::track(tape, {&a, &b})) {
        out->requires_grad = true;
        tape->record([a, b, out] {
            if (a->requires_grad) {
                a->ensure_grad();
                a->grad.noalias() += out->grad * b->value.transpose();
            }
            if (b->requires_grad) {
                b->ensure_grad();
                b->grad.noalias() += a->value.transpose() * out->grad;
            }
        });
    }
    return out;
}

// a * b^T without materializing the transpose.
template <typename Scalar>
TensorPtr<Scalar> matmul_nt(TapeT<Scalar>* tape, const TensorPtr<Scalar>& a,
                            const TensorPtr<Scalar>& b) {
    if (a->cols() != b->cols()) {
        throw ContractError("matmul_nt: contraction dims disagree, " +
                            detail::shape_str(a->rows(), a->cols()) + " * " +
                            detail::shape_str(b->rows(), b->cols()) + "^T");
    }
    auto out = tensor<Scalar>(a->value * b->value.transpose());
    if (detail::track(tape, {&a, &b})) {
        out->requires_grad = true;
        tape->record([a, b, out] {
            if (a->requires_grad) {
                a->ensure_grad();
                a->grad.noalias() += out->grad * b->value;
            }
            if (b->requires_grad) {
                b->ensure_grad();
                b->grad.noalias() += out->grad.transpose() * a->value;
            }
        });
    }
    return out;
}

// x[n x in] * w[out x in]^T + bias broadcast over rows. bias may be null.
template <typename Scalar>
TensorPtr<Scalar> linear(TapeT<Scalar>* tape, const TensorPtr<Scalar>& x,
                         const TensorPtr<Scalar>& w, const TensorPtr<Scalar>& b) {
    if (x->cols() != w->cols()) {
        throw ContractError("linear: input width " +
                            detail::shape_str(x->rows(), x->cols()) +
                            " does not match weight " +
                            detail::shape_str(w->rows(), w->cols()));
    }
    Mat<Scalar> v = x->value * w->value.transpose();
    if (b) {
        detail::want_shape(b, "linear bias", 1, w->rows());
        v.rowwise() += b->value.row(0);
    }
    auto out = tensor<Scalar>(std::move(v));
    if (detail::track(tape, {&x, &w, &b})) {
        out->requires_grad = true;
        tape->record([x, w, b, out] {
            if (x->requires_grad) {
                x->ensure_grad();
                x->grad.noalias() += out->grad * w->value;
            }
            if (w->requires_grad) {
                w->ensure_grad();
                w->grad.noalias() += out->grad.transpose() * x->value;
            }
            if (b && b->requires_grad) {
                b->ensure_grad();
                b->grad.row(0) += out->grad.colwise().sum();
            }
        });
    }
    return out;
}

// ---------------------------------------------------------------- pointwise

template <typename Scalar>
TensorPtr<Scalar> add(TapeT<Scalar>* tape, const TensorPtr<Scalar>& a,
                      const TensorPtr<Scalar>& b) {
    detail::want_shape(b, "add", a->rows(), a->cols());
    auto out = tensor<Scalar>(a->value + b->value);
    if (detail::track(tape, {&a, &b})) {
        out->requires_grad = true;
        tape->record([a, b, out] {
            if (a->requires_grad) {
                a->ensure_grad();
                a->grad += out->grad;
            }
            if (b->requires_grad) {
                b->ensure_grad();
                b->grad += out->grad;
            }
        });
    }
    return out;
}

template <typename Scalar>
TensorPtr<Scalar> scale(TapeT<Scalar>* tape, const TensorPtr<Scalar>& a, Scalar s) {
    auto out = tensor<Scalar>(Mat<Scalar>(a->value * s));
    if (detail::track(tape, {&a})) {
        out->requires_grad = true;
        tape->record([a, out, s] {
            a->ensure_grad();
            a->grad += out->grad * s;
        });
    }
    return out;
}

template <typename Scalar>
TensorPtr<Scalar> relu(TapeT<Scalar>* tape, const TensorPtr<Scalar>& x) {
    auto out = tensor<Scalar>(Mat<Scalar>(x->value.cwiseMax(Scalar(0))));
    if (detail::track(tape, {&x})) {
        out->requires_grad = true;
        tape->record([x, out] {
            x->ensure_grad();
            x->grad.array() +=
                out->grad.array() * (x->value.array() > Scalar(0)).template cast<Scalar>();
        });
    }
    return out;
}

// Exact erf formulation.
template <typename Scalar>
TensorPtr<Scalar> gelu(TapeT<Scalar>* tape, const TensorPtr<Scalar>& x) {
    const double inv_sqrt2 = 0.70710678118654752440;
    const double inv_sqrt2pi = 0.39894228040143267794;
    Mat<Scalar> v(x->rows(), x->cols());
    const Scalar* xv = x->value.data();
    Scalar* ov = v.data();
    for (Eigen::Index i = 0; i < x->size(); ++i) {
        double u = double(xv[i]);
        ov[i] = Scalar(0.5 * u * (1.0 + std::erf(u * inv_sqrt2)));
    }
    auto out = tensor<Scalar>(std::move(v));
    if (detail::track(tape, {&x})) {
        out->requires_grad = true;
        tape->record([x, out, inv_sqrt2, inv_sqrt2pi] {
            x->ensure_grad();
            const Scalar* xv = x->value.data();
            const Scalar* gv = out->grad.data();
            Scalar* xg = x->grad.data();
            for (Eigen::Index i = 0; i < x->size(); ++i) {
                double u = double(xv[i]);
                double d = 0.5 * (1.0 + std::erf(u * inv_sqrt2)) +
                           u * inv_sqrt2pi * std::exp(-0.5 * u * u);
                xg[i] += Scalar(double(gv[i]) * d);
            }
        });
    }
    return out;
}

template <typename Scalar>
TensorPtr<Scalar> sigmoid(TapeT<Scalar>* tape, const TensorPtr<Scalar>& x) {
    Mat<Scalar> v(x->rows(), x->cols());
    for (Eigen::Index i = 0; i < x->size(); ++i) {
        v.data()[i] = Scalar(1.0 / (1.0 + std::exp(-double(x->value.data()[i]))));
    }
    auto out = tensor<Scalar>(std::move(v));
    if (detail::track(tape, {&x})) {
        out->requires_grad = true;
        tape->record([x, out] {
            x->ensure_grad();
            x->grad.array() += out->grad.array() * out->value.array() *
                               (Scalar(1) - out->value.array());
        });
    }
    return out;
}

// sigmoid(gate) * a + (1 - sigmoid(gate)) * b with a scalar gate tensor.
template <typename Scalar>
TensorPtr<Scalar> gated_add(TapeT<Scalar>* tape, const TensorPtr<Scalar>& gate,
                            const TensorPtr<Scalar>& a, const TensorPtr<Scalar>& b) {
    if (gate->size() != 1) throw ContractError("gated_add: gate must be 1x1");
    detail::want_shape(b, "gated_add", a->rows(), a->cols());
    Scalar s = Scalar(1.0 / (1.0 + std::exp(-double(gate->value(0, 0)))));
    auto out = tensor<Scalar>(Mat<Scalar>(a->value * s + b->value * (Scalar(1) - s)));
    if (detail::track(tape, {&gate, &a, &b})) {
        out->requires_grad = true;
        tape->record([gate, a, b, out, s] {
            if (a->requires_grad) {
                a->ensure_grad();
                a->grad += out->grad * s;
            }
            if (b->requires_grad) {
                b->ensure_grad();
                b->grad += out->grad * (Scalar(1) - s);
            }
            if (gate->requires_grad) {
                gate->ensure_grad();
                double acc = 0.0;
                for (Eigen::Index i = 0; i < out->size(); ++i) {
                    acc += double(out->grad.data()[i]) *
                           double(a->value.data()[i] - b->value.data()[i]);
                }
                gate->grad(0, 0) += Scalar(acc * double(s) * (1.0 - double(s)));
            }
        });
    }
    return out;
}

// ---------------------------------------------------------------- structure

template <typename Scalar>
TensorPtr<Scalar> concat_rows(TapeT<Scalar>* tape, const TensorPtr<Scalar>& a,
                              const TensorPtr<Scalar>& b) {
    if (a->cols() != b->cols()) {
        throw ContractError("concat_rows: column counts disagree, " +
                            detail::shape_str(a->rows(), a->cols()) + " vs " +
                            detail::shape_str(b->rows(), b->cols()));
    }
    Mat<Scalar> v(a->rows() + b->rows(), a->cols());
    v.topRows(a->rows()) = a->value;
    v.bottomRows(b->rows()) = b->value;
    auto out = tensor<Scalar>(std::move(v));
    if (detail::track(tape, {&a, &b})) {
        out->requires_grad = true;
        tape->record([a, b, out] {
            if (a->requires_grad) {
                a->ensure_grad();
                a->grad += out->grad.topRows(a->rows());
            }
            if (b->requires_grad) {
                b->ensure_grad();
                b->grad += out->grad.bottomRows(b->rows());
            }
        });
    }
    return out;
}

// Gather rows of a table by id. Ids must lie in [0, table rows).
template <typename Scalar>
TensorPtr<Scalar> embedding_rows(TapeT<Scalar>* tape, const TensorPtr<Scalar>& table,
                                 const std::vector<int>& ids) {
    Mat<Scalar> v(Eigen::Index(ids.size()), table->cols());
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (ids[i] < 0 || ids[i] >= table->rows()) {
            throw ContractError("embedding_rows: id " + std::to_string(ids[i]) +
                                " outside table of " + std::to_string(table->rows()) +
                                " rows");
        }
        v.row(Eigen::Index(i)) = table->value.row(ids[i]);
    }
    auto out = tensor<Scalar>(std::move(v));
    if (detail::track(tape, {&table})) {
        out->requires_grad = true;
        tape->record([table, out, ids] {
            table->ensure_grad();
            for (std::size_t i = 0; i < ids.size(); ++i) {
                table->grad.row(ids[i]) += out->grad.row(Eigen::Index(i));
            }
        });
    }
    return out;
}

// Value copy that drops tape participation: downstream gradients stop here and
// zero flows into the source.
template <typename Scalar>
TensorPtr<Scalar> stop_gradient(const TensorPtr<Scalar>& x) {
    return tensor<Scalar>(x->value, false);
}

// ------------------------------------------------------------- reductions

// Row-wise softmax with an optional additive {0, -inf} mask. Masked entries
// are excluded from the max and the sum, and come out exactly 0.
template <typename Scalar>
TensorPtr<Scalar> softmax_masked(TapeT<Scalar>* tape, const TensorPtr<Scalar>& x,
                                 const Mat<Scalar>* mask = nullptr) {
    if (mask != nullptr && (mask->rows() != x->rows() || mask->cols() != x->cols())) {
        throw ContractError("softmax_masked: mask " +
                            detail::shape_str(mask->rows(), mask->cols()) +
                            " does not match logits " +
                            detail::shape_str(x->rows(), x->cols()));
    }
    const Eigen::Index n = x->rows(), m = x->cols();
    Mat<Scalar> v(n, m);
    for (Eigen::Index i = 0; i < n; ++i) {
        double mx = -std::numeric_limits<double>::infinity();
        for (Eigen::Index j = 0; j < m; ++j) {
            if (mask && (*mask)(i, j) != Scalar(0)) continue;
            mx = std::max(mx, double(x->value(i, j)));
        }
        if (!std::isfinite(mx)) {
            throw ContractError("softmax_masked: row " + std::to_string(i) +
                                " is fully masked");
        }
        double sum = 0.0;
        for (Eigen::Index j = 0; j < m; ++j) {
            if (mask && (*mask)(i, j) != Scalar(0)) {
                v(i, j) = Scalar(0);
            } else {
                double e = std::exp(double(x->value(i, j)) - mx);
                v(i, j) = Scalar(e);
                sum += e;
            }
        }
        double inv = 1.0 / sum;
        for (Eigen::Index j = 0; j < m; ++j) {
            if (!(mask && (*mask)(i, j) != Scalar(0))) {
                v(i, j) = Scalar(double(v(i, j)) * inv);
            }
        }
    }
    auto out = tensor<Scalar>(std::move(v));
    if (detail::track(tape, {&x})) {
        out->requires_grad = true;
        tape->record([x, out] {
            x->ensure_grad();
            for (Eigen::Index i = 0; i < out->rows(); ++i) {
                double dot = 0.0;
                for (Eigen::Index j = 0; j < out->cols(); ++j) {
                    dot += double(out->grad(i, j)) * double(out->value(i, j));
                }
                for (Eigen::Index j = 0; j < out->cols(); ++j) {
                    x->grad(i, j) += Scalar(double(out->value(i, j)) *
                                            (double(out->grad(i, j)) - dot));
                }
            }
        });
    }
    return out;
}

// Row-wise layer norm with learned gain/bias (1 x width each).
template <typename Scalar>
TensorPtr<Scalar> layer_norm(TapeT<Scalar>* tape, const TensorPtr<Scalar>& x,
                             const TensorPtr<Scalar>& gamma,
                             const TensorPtr<Scalar>& beta, double eps = 1e-5) {
    detail::want_shape(gamma, "layer_norm gain", 1, x->cols());
    detail::want_shape(beta, "layer_norm bias", 1, x->cols());
    const Eigen::Index n = x->rows(), d = x->cols();
    Mat<Scalar> v(n, d);
    // Normalized rows and inverse sigmas are needed again in backward.
    auto xhat = std::make_shared<Mat<Scalar>>(n, d);
    auto inv_sigma = std::make_shared<std::vector<double>>(std::size_t(n));
    for (Eigen::Index i = 0; i < n; ++i) {
        double mean = 0.0;
        for (Eigen::Index j = 0; j < d; ++j) mean += double(x->value(i, j));
        mean /= double(d);
        double var = 0.0;
        for (Eigen::Index j = 0; j < d; ++j) {
            double c = double(x->value(i, j)) - mean;
            var += c * c;
        }
        var /= double(d);
        double is = 1.0 / std::sqrt(var + eps);
        (*inv_sigma)[std::size_t(i)] = is;
        for (Eigen::Index j = 0; j < d; ++j) {
            double h = (double(x->value(i, j)) - mean) * is;
            (*xhat)(i, j) = Scalar(h);
            v(i, j) = Scalar(h * double(gamma->value(0, j)) + double(beta->value(0, j)));
        }
    }
    auto out = tensor<Scalar>(std::move(v));
    if (detail::track(tape, {&x, &gamma, &beta})) {
        out->requires_grad = true;
        tape->record([x, gamma, beta, out, xhat, inv_sigma] {
            const Eigen::Index n = x->rows(), d = x->cols();
            if (gamma->requires_grad) gamma->ensure_grad();
            if (beta->requires_grad) beta->ensure_grad();
            if (x->requires_grad) x->ensure_grad();
            for (Eigen::Index i = 0; i < n; ++i) {
                double sum_dh = 0.0, sum_dh_h = 0.0;
                for (Eigen::Index j = 0; j < d; ++j) {
                    double g = double(out->grad(i, j));
                    double h = double((*xhat)(i, j));
                    if (gamma->requires_grad) gamma->grad(0, j) += Scalar(g * h);
                    if (beta->requires_grad) beta->grad(0, j) += Scalar(g);
                    double dh = g * double(gamma->value(0, j));
                    sum_dh += dh;
                    sum_dh_h += dh * h;
                }
                if (x->requires_grad) {
                    double is = (*inv_sigma)[std::size_t(i)];
                    double inv_d = 1.0 / double(d);
                    for (Eigen::Index j = 0; j < d; ++j) {
                        double dh = double(out->grad(i, j)) * double(gamma->value(0, j));
                        double h = double((*xhat)(i, j));
                        x->grad(i, j) += Scalar(
                            is * (dh - sum_dh * inv_d - h * sum_dh_h * inv_d));
                    }
                }
            }
        });
    }
    return out;
}

// Mean negative log-softmax over rows whose target is not ignore_id.
// Targets index columns of the logits; out-of-range targets throw.
template <typename Scalar>
TensorPtr<Scalar> cross_entropy(TapeT<Scalar>* tape, const TensorPtr<Scalar>& logits,
                                const std::vector<int>& targets, int ignore_id) {
    if (Eigen::Index(targets.size()) != logits->rows()) {
        throw ContractError("cross_entropy: " + std::to_string(targets.size()) +
                            " targets for " + std::to_string(logits->rows()) +
                            " rows");
    }
    const Eigen::Index n = logits->rows(), c = logits->cols();
    auto probs = std::make_shared<Mat<Scalar>>(n, c);
    double total = 0.0;
    int counted = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
        int t = targets[std::size_t(i)];
        if (t == ignore_id) continue;
        if (t < 0 || t >= int(c)) {
            throw ContractError("cross_entropy: target " + std::to_string(t) +
                                " outside " + std::to_string(c) + " classes at row " +
                                std::to_string(i));
        }
        double mx = -std::numeric_limits<double>::infinity();
        for (Eigen::Index j = 0; j < c; ++j) mx = std::max(mx, double(logits->value(i, j)));
        double sum = 0.0;
        for (Eigen::Index j = 0; j < c; ++j) sum += std::exp(double(logits->value(i, j)) - mx);
        double lse = mx + std::log(sum);
        for (Eigen::Index j = 0; j < c; ++j) {
            (*probs)(i, j) = Scalar(std::exp(double(logits->value(i, j)) - lse));
        }
        total += lse - double(logits->value(i, t));
        ++counted;
    }
    if (counted == 0) {
        throw ContractError("cross_entropy: every target equals the ignore id");
    }
    Mat<Scalar> v(1, 1);
    v(0, 0) = Scalar(total / double(counted));
    auto out = tensor<Scalar>(std::move(v));
    if (detail::track(tape, {&logits})) {
        out->requires_grad = true;
        tape->record([logits, out, probs, targets, ignore_id, counted] {
            logits->ensure_grad();
            Scalar g = out->grad(0, 0) / Scalar(counted);
            for (Eigen::Index i = 0; i < logits->rows(); ++i) {
                int t = targets[std::size_t(i)];
                if (t == ignore_id) continue;
                for (Eigen::Index j = 0; j < logits->cols(); ++j) {
                    Scalar p = (*probs)(i, j);
                    logits->grad(i, j) += g * (p - (int(j) == t ? Scalar(1) : Scalar(0)));
                }
            }
        });
    }
    return out;
}

// Scalar contraction sum(x .* w); the standard way tests turn a matrix-valued
// op into a checkable objective.
template <typename Scalar>
TensorPtr<Scalar> weighted_sum(TapeT<Scalar>* tape, const TensorPtr<Scalar>& x,
                               const Mat<Scalar>& w) {
    if (w.rows() != x->rows() || w.cols() != x->cols()) {
        throw ContractError("weighted_sum: weight shape mismatch");
    }
    double acc = 0.0;
    for (Eigen::Index i = 0; i < x->size(); ++i) {
        acc += double(x->value.data()[i]) * double(w.data()[i]);
    }
    Mat<Scalar> v(1, 1);
    v(0, 0) = Scalar(acc);
    auto out = tensor<Scalar>(std::move(v));
    if (detail::track(tape, {&x})) {
        out->requires_grad = true;
        auto wc = std::make_shared<Mat<Scalar>>(w);
        tape->record([x, out, wc] {
            x->ensure_grad();
            x->grad += out->grad(0, 0) * (*wc);
        });
    }
    return out;
}

// -------------------------------------------------------------- stochastic

// Inverted dropout: kept entries are scaled by 1/(1-rate) so evaluation is the
// identity. The stream is counter-derived by the caller, which is what makes
// the draw independent of op evaluation order.
template <typename Scalar>
TensorPtr<Scalar> dropout(TapeT<Scalar>* tape, const TensorPtr<Scalar>& x,
                          double rate, bool training, Rng stream) {
    if (rate < 0.0 || rate >= 1.0) {
        throw ContractError("dropout: rate " + std::to_string(rate) +
                            " outside [0, 1)");
    }
    if (!training || rate == 0.0) return x;
    Scalar keep_scale = Scalar(1.0 / (1.0 - rate));
    auto kept = std::make_shared<Mat<Scalar>>(x->rows(), x->cols());
    Mat<Scalar> v(x->rows(), x->cols());
    for (Eigen::Index i = 0; i < x->size(); ++i) {
        bool keep = stream.uniform() >= rate;
        (*kept).data()[i] = keep ? keep_scale : Scalar(0);
        v.data()[i] = x->value.data()[i] * (*kept).data()[i];
    }
    auto out = tensor<Scalar>(std::move(v));
    if (detail::track(tape, {&x})) {
        out->requires_grad = true;
        tape->record([x, out, kept] {
            x->ensure_grad();
            x->grad.array() += out->grad.array() * kept->array();
        });
    }
    return out;
}

// ------------------------------------------------------------- grad check

struct GradCheckReport {
    double max_rel_error = 0.0;
    std::string worst;  // "tensor[i,j]" of the worst coordinate
    int coords_checked = 0;
};

// Central-difference check of tape gradients.
//
// `build` must reconstruct the scalar objective from the current values of
// `inputs` (and may read other constants). It is called once with a tape to
// obtain analytic gradients, then twice per probed coordinate without one.
// Relative error uses denominator max(|analytic|, |numeric|, 1e-8). When
// max_coords_per_tensor > 0, coordinates are subsampled deterministically;
// 0 checks every coordinate.
template <typename Scalar>
GradCheckReport grad_check(
    const std::function<TensorPtr<Scalar>(TapeT<Scalar>*)>& build,
    const std::vector<TensorPtr<Scalar>>& inputs, double step,
    int max_coords_per_tensor = 0, std::uint64_t sample_seed = 0) {
    TapeT<Scalar> tape;
    for (const auto& t : inputs) t->zero_grad();
    auto loss = build(&tape);
    tape.backward(loss);

    std::vector<Mat<Scalar>> analytic;
    analytic.reserve(inputs.size());
    for (const auto& t : inputs) {
        t->ensure_grad();
        analytic.push_back(t->grad);
    }

    GradCheckReport report;
    for (std::size_t ti = 0; ti < inputs.size(); ++ti) {
        auto& t = inputs[ti];
        std::vector<Eigen::Index> coords;
        if (max_coords_per_tensor > 0 && t->size() > max_coords_per_tensor) {
            Rng rng = Rng::derive(sample_seed, 0x67636b, ti);
            for (int k = 0; k < max_coords_per_tensor; ++k) {
                coords.push_back(Eigen::Index(rng.next_u64() % std::uint64_t(t->size())));
            }
        } else {
            for (Eigen::Index i = 0; i < t->size(); ++i) coords.push_back(i);
        }
        for (Eigen::Index idx : coords) {
            Scalar saved = t->value.data()[idx];
            t->value.data()[idx] = saved + Scalar(step);
            double f_plus = double(build(nullptr)->value(0, 0));
            t->value.data()[idx] = saved - Scalar(step);
            double f_minus = double(build(nullptr)->value(0, 0));
            t->value.data()[idx] = saved;
            double numeric = (f_plus - f_minus) / (2.0 * step);
            double a = double(analytic[ti].data()[idx]);
            double denom = std::max({std::fabs(a), std::fabs(numeric), 1e-8});
            double rel = std::fabs(a - numeric) / denom;
            ++report.coords_checked;
            if (rel > report.max_rel_error) {
                report.max_rel_error = rel;
                report.worst = (t->name.empty() ? "input" + std::to_string(ti) : t->name) +
                               "[" + std::to_string(idx / t->cols()) + "," +
                               std::to_string(idx % t->cols()) + "]";
            }
        }
    }
    return report;
}

}  // namespace cmstr
