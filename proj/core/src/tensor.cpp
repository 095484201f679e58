#include "arbiter/nn/tensor.hpp"

#include <cmath>
#include <unordered_set>

#include "arbiter/errors.hpp"
#include "arbiter/nn/modules.hpp"

namespace arbiter::nn {

namespace {

thread_local bool g_grad_enabled = true;

// C (M x N) += A (M x K) * B (K x N)
void mm_nn(const double* a, const double* b, double* c, long m, long k, long n) {
    for (long i = 0; i < m; ++i) {
        const double* arow = a + i * k;
        double* crow = c + i * n;
        for (long p = 0; p < k; ++p) {
            const double av = arow[p];
            if (av == 0.0) continue;
            const double* brow = b + p * n;
            for (long j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

// C (M x N) += A (M x K) * B (N x K)^T
void mm_nt(const double* a, const double* b, double* c, long m, long k, long n) {
    for (long i = 0; i < m; ++i) {
        const double* arow = a + i * k;
        double* crow = c + i * n;
        for (long j = 0; j < n; ++j) {
            const double* brow = b + j * k;
            double acc = 0.0;
            for (long p = 0; p < k; ++p) acc += arow[p] * brow[p];
            crow[j] += acc;
        }
    }
}

// C (M x N) += A (K x M)^T * B (K x N)
void mm_tn(const double* a, const double* b, double* c, long m, long k, long n) {
    for (long p = 0; p < k; ++p) {
        const double* arow = a + p * m;
        const double* brow = b + p * n;
        for (long i = 0; i < m; ++i) {
            const double av = arow[i];
            if (av == 0.0) continue;
            double* crow = c + i * n;
            for (long j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

std::shared_ptr<Node> make_node(TensorData val) {
    auto n = std::make_shared<Node>();
    n->val = std::move(val);
    return n;
}

bool any_requires_grad(const std::vector<Variable>& inputs) {
    for (const auto& v : inputs) {
        if (v.requires_grad()) return true;
    }
    return false;
}

// Wires parents/backprop only when the tape is recording.
Variable finish(std::shared_ptr<Node> n, const std::vector<Variable>& inputs,
                std::function<void(Node&)> backprop) {
    if (g_grad_enabled && any_requires_grad(inputs)) {
        n->requires_grad = true;
        n->parents.reserve(inputs.size());
        for (const auto& v : inputs) n->parents.push_back(v.node());
        n->backprop = std::move(backprop);
    }
    return Variable(std::move(n));
}

void accumulate(Node& parent, const TensorData& g) {
    if (!parent.requires_grad) return;
    parent.ensure_grad();
    for (std::size_t i = 0; i < g.v.size(); ++i) parent.grad.v[i] += g.v[i];
}

void check_same_shape(const Variable& a, const Variable& b, const char* op) {
    if (!a.value().same_shape(b.value())) throw Error(std::string(op) + ": shape mismatch");
}

} // namespace

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

Variable constant(TensorData data) { return Variable(make_node(std::move(data))); }

Variable make_leaf(TensorData data, bool requires_grad, Param* bound) {
    auto n = make_node(std::move(data));
    n->requires_grad = requires_grad && g_grad_enabled;
    n->bound = bound;
    return Variable(std::move(n));
}

Variable add(const Variable& a, const Variable& b) {
    check_same_shape(a, b, "add");
    TensorData out = a.value();
    for (std::size_t i = 0; i < out.v.size(); ++i) out.v[i] += b.value().v[i];
    return finish(make_node(std::move(out)), {a, b}, [](Node& self) {
        accumulate(*self.parents[0], self.grad);
        accumulate(*self.parents[1], self.grad);
    });
}

Variable sub(const Variable& a, const Variable& b) {
    check_same_shape(a, b, "sub");
    TensorData out = a.value();
    for (std::size_t i = 0; i < out.v.size(); ++i) out.v[i] -= b.value().v[i];
    return finish(make_node(std::move(out)), {a, b}, [](Node& self) {
        accumulate(*self.parents[0], self.grad);
        Node& pb = *self.parents[1];
        if (pb.requires_grad) {
            pb.ensure_grad();
            for (std::size_t i = 0; i < self.grad.v.size(); ++i) pb.grad.v[i] -= self.grad.v[i];
        }
    });
}

Variable mul(const Variable& a, const Variable& b) {
    check_same_shape(a, b, "mul");
    TensorData out = a.value();
    for (std::size_t i = 0; i < out.v.size(); ++i) out.v[i] *= b.value().v[i];
    return finish(make_node(std::move(out)), {a, b}, [](Node& self) {
        Node& pa = *self.parents[0];
        Node& pb = *self.parents[1];
        if (pa.requires_grad) {
            pa.ensure_grad();
            for (std::size_t i = 0; i < self.grad.v.size(); ++i)
                pa.grad.v[i] += self.grad.v[i] * pb.val.v[i];
        }
        if (pb.requires_grad) {
            pb.ensure_grad();
            for (std::size_t i = 0; i < self.grad.v.size(); ++i)
                pb.grad.v[i] += self.grad.v[i] * pa.val.v[i];
        }
    });
}

Variable scale(const Variable& a, double s) {
    TensorData out = a.value();
    for (double& v : out.v) v *= s;
    return finish(make_node(std::move(out)), {a}, [s](Node& self) {
        Node& p = *self.parents[0];
        if (!p.requires_grad) return;
        p.ensure_grad();
        for (std::size_t i = 0; i < self.grad.v.size(); ++i) p.grad.v[i] += s * self.grad.v[i];
    });
}

Variable add_scalar(const Variable& a, double s) {
    TensorData out = a.value();
    for (double& v : out.v) v += s;
    return finish(make_node(std::move(out)), {a},
                  [](Node& self) { accumulate(*self.parents[0], self.grad); });
}

Variable add_row(const Variable& a, const Variable& row) {
    if (row.rows() != 1 || row.cols() != a.cols()) throw Error("add_row: shape mismatch");
    TensorData out = a.value();
    for (long r = 0; r < out.rows; ++r) {
        for (long c = 0; c < out.cols; ++c) out.at(r, c) += row.value().at(0, c);
    }
    return finish(make_node(std::move(out)), {a, row}, [](Node& self) {
        accumulate(*self.parents[0], self.grad);
        Node& prow = *self.parents[1];
        if (!prow.requires_grad) return;
        prow.ensure_grad();
        for (long r = 0; r < self.grad.rows; ++r) {
            for (long c = 0; c < self.grad.cols; ++c) prow.grad.at(0, c) += self.grad.at(r, c);
        }
    });
}

Variable matmul(const Variable& a, const Variable& b) {
    if (a.cols() != b.rows()) throw Error("matmul: inner dimensions differ");
    const long m = a.rows(), k = a.cols(), n = b.cols();
    TensorData out(m, n);
    mm_nn(a.value().v.data(), b.value().v.data(), out.v.data(), m, k, n);
    return finish(make_node(std::move(out)), {a, b}, [m, k, n](Node& self) {
        Node& pa = *self.parents[0];
        Node& pb = *self.parents[1];
        if (pa.requires_grad) {
            pa.ensure_grad();
            // dA += G * B^T
            mm_nt(self.grad.v.data(), pb.val.v.data(), pa.grad.v.data(), m, n, k);
        }
        if (pb.requires_grad) {
            pb.ensure_grad();
            // dB += A^T * G
            mm_tn(pa.val.v.data(), self.grad.v.data(), pb.grad.v.data(), k, m, n);
        }
    });
}

Variable transpose(const Variable& a) {
    TensorData out(a.cols(), a.rows());
    for (long r = 0; r < a.rows(); ++r) {
        for (long c = 0; c < a.cols(); ++c) out.at(c, r) = a.value().at(r, c);
    }
    return finish(make_node(std::move(out)), {a}, [](Node& self) {
        Node& p = *self.parents[0];
        if (!p.requires_grad) return;
        p.ensure_grad();
        for (long r = 0; r < self.grad.rows; ++r) {
            for (long c = 0; c < self.grad.cols; ++c) p.grad.at(c, r) += self.grad.at(r, c);
        }
    });
}

Variable relu(const Variable& a) {
    TensorData out = a.value();
    for (double& v : out.v) v = v > 0.0 ? v : 0.0;
    return finish(make_node(std::move(out)), {a}, [](Node& self) {
        Node& p = *self.parents[0];
        if (!p.requires_grad) return;
        p.ensure_grad();
        for (std::size_t i = 0; i < self.grad.v.size(); ++i) {
            if (p.val.v[i] > 0.0) p.grad.v[i] += self.grad.v[i];
        }
    });
}

Variable abs_val(const Variable& a) {
    TensorData out = a.value();
    for (double& v : out.v) v = std::abs(v);
    return finish(make_node(std::move(out)), {a}, [](Node& self) {
        Node& p = *self.parents[0];
        if (!p.requires_grad) return;
        p.ensure_grad();
        for (std::size_t i = 0; i < self.grad.v.size(); ++i) {
            const double x = p.val.v[i];
            if (x > 0.0) p.grad.v[i] += self.grad.v[i];
            else if (x < 0.0) p.grad.v[i] -= self.grad.v[i];
            // subgradient at 0 is taken as 0
        }
    });
}

Variable log_clamped(const Variable& a, double floor) {
    TensorData out = a.value();
    for (double& v : out.v) v = std::log(v > floor ? v : floor);
    return finish(make_node(std::move(out)), {a}, [floor](Node& self) {
        Node& p = *self.parents[0];
        if (!p.requires_grad) return;
        p.ensure_grad();
        for (std::size_t i = 0; i < self.grad.v.size(); ++i) {
            const double x = p.val.v[i];
            if (x > floor) p.grad.v[i] += self.grad.v[i] / x;
        }
    });
}

Variable softmax_rows(const Variable& a) {
    TensorData out = a.value();
    for (long r = 0; r < out.rows; ++r) {
        double mx = out.at(r, 0);
        for (long c = 1; c < out.cols; ++c) mx = std::max(mx, out.at(r, c));
        double sum = 0.0;
        for (long c = 0; c < out.cols; ++c) {
            out.at(r, c) = std::exp(out.at(r, c) - mx);
            sum += out.at(r, c);
        }
        for (long c = 0; c < out.cols; ++c) out.at(r, c) /= sum;
    }
    return finish(make_node(std::move(out)), {a}, [](Node& self) {
        Node& p = *self.parents[0];
        if (!p.requires_grad) return;
        p.ensure_grad();
        for (long r = 0; r < self.val.rows; ++r) {
            double dot = 0.0;
            for (long c = 0; c < self.val.cols; ++c) dot += self.grad.at(r, c) * self.val.at(r, c);
            for (long c = 0; c < self.val.cols; ++c) {
                p.grad.at(r, c) += self.val.at(r, c) * (self.grad.at(r, c) - dot);
            }
        }
    });
}

Variable sum_all(const Variable& a) {
    TensorData out(1, 1);
    for (double v : a.value().v) out.v[0] += v;
    return finish(make_node(std::move(out)), {a}, [](Node& self) {
        Node& p = *self.parents[0];
        if (!p.requires_grad) return;
        p.ensure_grad();
        const double g = self.grad.v[0];
        for (double& gv : p.grad.v) gv += g;
    });
}

Variable mean_all(const Variable& a) {
    const double inv = 1.0 / static_cast<double>(a.value().size());
    TensorData out(1, 1);
    for (double v : a.value().v) out.v[0] += v;
    out.v[0] *= inv;
    return finish(make_node(std::move(out)), {a}, [inv](Node& self) {
        Node& p = *self.parents[0];
        if (!p.requires_grad) return;
        p.ensure_grad();
        const double g = self.grad.v[0] * inv;
        for (double& gv : p.grad.v) gv += g;
    });
}

Variable concat_rows(const std::vector<Variable>& parts) {
    if (parts.empty()) throw Error("concat_rows: empty input");
    const long cols = parts.front().cols();
    long rows = 0;
    for (const auto& p : parts) {
        if (p.cols() != cols) throw Error("concat_rows: column mismatch");
        rows += p.rows();
    }
    TensorData out(rows, cols);
    long r = 0;
    for (const auto& p : parts) {
        std::copy(p.value().v.begin(), p.value().v.end(), out.v.begin() + r * cols);
        r += p.rows();
    }
    return finish(make_node(std::move(out)), parts, [cols](Node& self) {
        long r0 = 0;
        for (auto& parent : self.parents) {
            const long pr = parent->val.rows;
            if (parent->requires_grad) {
                parent->ensure_grad();
                for (long i = 0; i < pr * cols; ++i) {
                    parent->grad.v[static_cast<std::size_t>(i)] +=
                        self.grad.v[static_cast<std::size_t>(r0 * cols + i)];
                }
            }
            r0 += pr;
        }
    });
}

Variable concat_cols(const std::vector<Variable>& parts) {
    if (parts.empty()) throw Error("concat_cols: empty input");
    const long rows = parts.front().rows();
    long cols = 0;
    for (const auto& p : parts) {
        if (p.rows() != rows) throw Error("concat_cols: row mismatch");
        cols += p.cols();
    }
    TensorData out(rows, cols);
    long c0 = 0;
    for (const auto& p : parts) {
        for (long r = 0; r < rows; ++r) {
            for (long c = 0; c < p.cols(); ++c) out.at(r, c0 + c) = p.value().at(r, c);
        }
        c0 += p.cols();
    }
    return finish(make_node(std::move(out)), parts, [rows](Node& self) {
        long c0 = 0;
        for (auto& parent : self.parents) {
            const long pc = parent->val.cols;
            if (parent->requires_grad) {
                parent->ensure_grad();
                for (long r = 0; r < rows; ++r) {
                    for (long c = 0; c < pc; ++c) {
                        parent->grad.at(r, c) += self.grad.at(r, c0 + c);
                    }
                }
            }
            c0 += pc;
        }
    });
}

Variable slice_rows(const Variable& a, long r0, long r1) {
    if (r0 < 0 || r1 > a.rows() || r0 >= r1) throw Error("slice_rows: bad range");
    const long cols = a.cols();
    TensorData out(r1 - r0, cols);
    std::copy(a.value().v.begin() + r0 * cols, a.value().v.begin() + r1 * cols, out.v.begin());
    return finish(make_node(std::move(out)), {a}, [r0, cols](Node& self) {
        Node& p = *self.parents[0];
        if (!p.requires_grad) return;
        p.ensure_grad();
        for (long i = 0; i < self.grad.rows * cols; ++i) {
            p.grad.v[static_cast<std::size_t>(r0 * cols + i)] +=
                self.grad.v[static_cast<std::size_t>(i)];
        }
    });
}

Variable slice_cols(const Variable& a, long c0, long c1) {
    if (c0 < 0 || c1 > a.cols() || c0 >= c1) throw Error("slice_cols: bad range");
    TensorData out(a.rows(), c1 - c0);
    for (long r = 0; r < a.rows(); ++r) {
        for (long c = c0; c < c1; ++c) out.at(r, c - c0) = a.value().at(r, c);
    }
    return finish(make_node(std::move(out)), {a}, [c0](Node& self) {
        Node& p = *self.parents[0];
        if (!p.requires_grad) return;
        p.ensure_grad();
        for (long r = 0; r < self.grad.rows; ++r) {
            for (long c = 0; c < self.grad.cols; ++c) p.grad.at(r, c0 + c) += self.grad.at(r, c);
        }
    });
}

Variable pick(const Variable& a, long r, long c) {
    if (r < 0 || r >= a.rows() || c < 0 || c >= a.cols()) throw Error("pick: index out of range");
    TensorData out(1, 1);
    out.v[0] = a.value().at(r, c);
    return finish(make_node(std::move(out)), {a}, [r, c](Node& self) {
        Node& p = *self.parents[0];
        if (!p.requires_grad) return;
        p.ensure_grad();
        p.grad.at(r, c) += self.grad.v[0];
    });
}

Variable normalize_rows(const Variable& a) {
    const long rows = a.rows(), cols = a.cols();
    TensorData out = a.value();
    std::vector<double> norms(static_cast<std::size_t>(rows));
    for (long r = 0; r < rows; ++r) {
        double acc = 0.0;
        for (long c = 0; c < cols; ++c) acc += out.at(r, c) * out.at(r, c);
        const double n = std::max(std::sqrt(acc), 1e-12);
        norms[static_cast<std::size_t>(r)] = n;
        for (long c = 0; c < cols; ++c) out.at(r, c) /= n;
    }
    return finish(make_node(std::move(out)), {a}, [norms](Node& self) {
        Node& p = *self.parents[0];
        if (!p.requires_grad) return;
        p.ensure_grad();
        const long cols = self.val.cols;
        for (long r = 0; r < self.val.rows; ++r) {
            const double n = norms[static_cast<std::size_t>(r)];
            double xg = 0.0;
            for (long c = 0; c < cols; ++c) xg += p.val.at(r, c) * self.grad.at(r, c);
            for (long c = 0; c < cols; ++c) {
                p.grad.at(r, c) += self.grad.at(r, c) / n - p.val.at(r, c) * xg / (n * n * n);
            }
        }
    });
}

Variable layer_norm(const Variable& x, const Variable& gamma, const Variable& beta, double eps) {
    const long rows = x.rows(), cols = x.cols();
    if (gamma.rows() != 1 || gamma.cols() != cols || beta.rows() != 1 || beta.cols() != cols) {
        throw Error("layer_norm: gamma/beta must be 1 x cols");
    }
    TensorData out(rows, cols);
    std::vector<double> inv_std(static_cast<std::size_t>(rows));
    std::vector<double> xhat(static_cast<std::size_t>(rows * cols));
    for (long r = 0; r < rows; ++r) {
        double mean = 0.0;
        for (long c = 0; c < cols; ++c) mean += x.value().at(r, c);
        mean /= static_cast<double>(cols);
        double var = 0.0;
        for (long c = 0; c < cols; ++c) {
            const double d = x.value().at(r, c) - mean;
            var += d * d;
        }
        var /= static_cast<double>(cols);
        const double is = 1.0 / std::sqrt(var + eps);
        inv_std[static_cast<std::size_t>(r)] = is;
        for (long c = 0; c < cols; ++c) {
            const double h = (x.value().at(r, c) - mean) * is;
            xhat[static_cast<std::size_t>(r * cols + c)] = h;
            out.at(r, c) = gamma.value().at(0, c) * h + beta.value().at(0, c);
        }
    }
    auto xhat_ptr = std::make_shared<std::vector<double>>(std::move(xhat));
    return finish(make_node(std::move(out)), {x, gamma, beta},
                  [inv_std, xhat_ptr](Node& self) {
        Node& px = *self.parents[0];
        Node& pg = *self.parents[1];
        Node& pb = *self.parents[2];
        const long rows = self.val.rows, cols = self.val.cols;
        const auto& xh = *xhat_ptr;
        if (pg.requires_grad) {
            pg.ensure_grad();
            for (long r = 0; r < rows; ++r) {
                for (long c = 0; c < cols; ++c) {
                    pg.grad.at(0, c) += self.grad.at(r, c) * xh[static_cast<std::size_t>(r * cols + c)];
                }
            }
        }
        if (pb.requires_grad) {
            pb.ensure_grad();
            for (long r = 0; r < rows; ++r) {
                for (long c = 0; c < cols; ++c) pb.grad.at(0, c) += self.grad.at(r, c);
            }
        }
        if (px.requires_grad) {
            px.ensure_grad();
            for (long r = 0; r < rows; ++r) {
                double sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
                for (long c = 0; c < cols; ++c) {
                    const double dxh = self.grad.at(r, c) * pg.val.at(0, c);
                    sum_dxhat += dxh;
                    sum_dxhat_xhat += dxh * xh[static_cast<std::size_t>(r * cols + c)];
                }
                const double inv_cols = 1.0 / static_cast<double>(cols);
                for (long c = 0; c < cols; ++c) {
                    const double dxh = self.grad.at(r, c) * pg.val.at(0, c);
                    const double h = xh[static_cast<std::size_t>(r * cols + c)];
                    px.grad.at(r, c) += inv_std[static_cast<std::size_t>(r)] *
                        (dxh - inv_cols * sum_dxhat - h * inv_cols * sum_dxhat_xhat);
                }
            }
        }
    });
}

Variable batch_norm_time(const Variable& x, const Variable& gamma, const Variable& beta,
                         double eps, bool training, TensorData* running_mean,
                         TensorData* running_var, double momentum) {
    const long rows = x.rows(), cols = x.cols();
    if (gamma.cols() != cols || beta.cols() != cols) throw Error("batch_norm_time: bad affine shape");
    if (!running_mean || !running_var) throw Error("batch_norm_time: missing running stats");

    // Statistics come from the current sequence in both modes: with one
    // sequence per forward this is normalization over the time axis, and
    // running averages never match any individual input. The buffers are
    // still tracked during training and checkpointed as diagnostics.
    std::vector<double> mean(static_cast<std::size_t>(cols)), inv_std(static_cast<std::size_t>(cols));
    for (long c = 0; c < cols; ++c) {
        double m = 0.0;
        for (long r = 0; r < rows; ++r) m += x.value().at(r, c);
        m /= static_cast<double>(rows);
        double var = 0.0;
        for (long r = 0; r < rows; ++r) {
            const double d = x.value().at(r, c) - m;
            var += d * d;
        }
        var /= static_cast<double>(rows);
        mean[static_cast<std::size_t>(c)] = m;
        inv_std[static_cast<std::size_t>(c)] = 1.0 / std::sqrt(var + eps);
        if (training) {
            running_mean->v[static_cast<std::size_t>(c)] =
                (1.0 - momentum) * running_mean->v[static_cast<std::size_t>(c)] + momentum * m;
            running_var->v[static_cast<std::size_t>(c)] =
                (1.0 - momentum) * running_var->v[static_cast<std::size_t>(c)] + momentum * var;
        }
    }

    TensorData out(rows, cols);
    auto xhat = std::make_shared<std::vector<double>>(static_cast<std::size_t>(rows * cols));
    for (long r = 0; r < rows; ++r) {
        for (long c = 0; c < cols; ++c) {
            const double h = (x.value().at(r, c) - mean[static_cast<std::size_t>(c)]) *
                             inv_std[static_cast<std::size_t>(c)];
            (*xhat)[static_cast<std::size_t>(r * cols + c)] = h;
            out.at(r, c) = gamma.value().at(0, c) * h + beta.value().at(0, c);
        }
    }

    return finish(make_node(std::move(out)), {x, gamma, beta},
                  [inv_std, xhat](Node& self) {
        Node& px = *self.parents[0];
        Node& pg = *self.parents[1];
        Node& pb = *self.parents[2];
        const long rows = self.val.rows, cols = self.val.cols;
        const auto& xh = *xhat;
        if (pg.requires_grad) {
            pg.ensure_grad();
            for (long r = 0; r < rows; ++r) {
                for (long c = 0; c < cols; ++c) {
                    pg.grad.at(0, c) += self.grad.at(r, c) * xh[static_cast<std::size_t>(r * cols + c)];
                }
            }
        }
        if (pb.requires_grad) {
            pb.ensure_grad();
            for (long r = 0; r < rows; ++r) {
                for (long c = 0; c < cols; ++c) pb.grad.at(0, c) += self.grad.at(r, c);
            }
        }
        if (px.requires_grad) {
            px.ensure_grad();
            const double inv_rows = 1.0 / static_cast<double>(rows);
            for (long c = 0; c < cols; ++c) {
                double sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
                for (long r = 0; r < rows; ++r) {
                    const double dxh = self.grad.at(r, c) * pg.val.at(0, c);
                    sum_dxhat += dxh;
                    sum_dxhat_xhat += dxh * xh[static_cast<std::size_t>(r * cols + c)];
                }
                for (long r = 0; r < rows; ++r) {
                    const double dxh = self.grad.at(r, c) * pg.val.at(0, c);
                    const double h = xh[static_cast<std::size_t>(r * cols + c)];
                    px.grad.at(r, c) += inv_std[static_cast<std::size_t>(c)] *
                        (dxh - inv_rows * sum_dxhat - h * inv_rows * sum_dxhat_xhat);
                }
            }
        }
    });
}

Variable conv1d_same(const Variable& x, const Variable& w, const Variable& b,
                     int kernel, int stride) {
    const long t_in = x.rows(), c_in = x.cols();
    if (w.rows() != static_cast<long>(kernel) * c_in) throw Error("conv1d_same: weight rows != kernel * in_channels");
    const long c_out = w.cols();
    if (b.rows() != 1 || b.cols() != c_out) throw Error("conv1d_same: bad bias shape");
    if (stride < 1) throw Error("conv1d_same: stride must be >= 1");
    if (t_in < 1) throw Error("conv1d_same: empty input");

    const long t_out = (t_in + stride - 1) / stride;
    const long pad_total = std::max<long>(0, (t_out - 1) * stride + kernel - t_in);
    const long pad_left = pad_total / 2;

    auto xcol = std::make_shared<TensorData>(t_out, static_cast<long>(kernel) * c_in);
    for (long t = 0; t < t_out; ++t) {
        for (long j = 0; j < kernel; ++j) {
            const long src = t * stride + j - pad_left;
            if (src < 0 || src >= t_in) continue;
            for (long c = 0; c < c_in; ++c) {
                xcol->at(t, j * c_in + c) = x.value().at(src, c);
            }
        }
    }

    TensorData out(t_out, c_out);
    mm_nn(xcol->v.data(), w.value().v.data(), out.v.data(), t_out, kernel * c_in, c_out);
    for (long t = 0; t < t_out; ++t) {
        for (long c = 0; c < c_out; ++c) out.at(t, c) += b.value().at(0, c);
    }

    return finish(make_node(std::move(out)), {x, w, b},
                  [xcol, kernel, stride, pad_left, t_in, c_in](Node& self) {
        Node& px = *self.parents[0];
        Node& pw = *self.parents[1];
        Node& pb = *self.parents[2];
        const long t_out = self.val.rows, c_out = self.val.cols;
        if (pb.requires_grad) {
            pb.ensure_grad();
            for (long t = 0; t < t_out; ++t) {
                for (long c = 0; c < c_out; ++c) pb.grad.at(0, c) += self.grad.at(t, c);
            }
        }
        if (pw.requires_grad) {
            pw.ensure_grad();
            // dW += Xcol^T * G
            mm_tn(xcol->v.data(), self.grad.v.data(), pw.grad.v.data(),
                  kernel * c_in, t_out, c_out);
        }
        if (px.requires_grad) {
            px.ensure_grad();
            TensorData dxcol(t_out, static_cast<long>(kernel) * c_in);
            // dXcol = G * W^T
            mm_nt(self.grad.v.data(), pw.val.v.data(), dxcol.v.data(),
                  t_out, c_out, kernel * c_in);
            for (long t = 0; t < t_out; ++t) {
                for (long j = 0; j < kernel; ++j) {
                    const long src = t * stride + j - pad_left;
                    if (src < 0 || src >= t_in) continue;
                    for (long c = 0; c < c_in; ++c) {
                        px.grad.at(src, c) += dxcol.at(t, j * c_in + c);
                    }
                }
            }
        }
    });
}

void backward(const Variable& root) {
    if (!root.defined() || root.rows() != 1 || root.cols() != 1) {
        throw Error("backward: root must be a defined 1x1 scalar");
    }
    Node* root_node = root.node().get();
    if (!root_node->requires_grad) return;

    // Post-order DFS over parents; reversed order is a valid sweep order.
    std::vector<Node*> order;
    std::unordered_set<Node*> visited;
    std::vector<std::pair<Node*, std::size_t>> stack;
    stack.emplace_back(root_node, 0);
    visited.insert(root_node);
    while (!stack.empty()) {
        auto& [node, idx] = stack.back();
        if (idx < node->parents.size()) {
            Node* parent = node->parents[idx].get();
            ++idx;
            if (parent->requires_grad && !visited.count(parent)) {
                visited.insert(parent);
                stack.emplace_back(parent, 0);
            }
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    root_node->ensure_grad();
    root_node->grad.v[0] = 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* node = *it;
        if (node->backprop) {
            node->ensure_grad();
            node->backprop(*node);
        }
    }

    // Flush leaf gradients into their parameters and reset the leaves so a
    // later backward in the same step does not double-count.
    for (Node* node : order) {
        if (node->bound && node->grad.size() > 0) {
            Param& p = *node->bound;
            if (!p.grad.same_shape(node->grad)) p.grad = TensorData::zeros(node->grad.rows, node->grad.cols);
            for (std::size_t i = 0; i < node->grad.v.size(); ++i) p.grad.v[i] += node->grad.v[i];
            node->grad.zero();
        }
    }
}

TensorData sinusoidal_positions(long length, long dim) {
    TensorData pe(length, dim);
    for (long t = 0; t < length; ++t) {
        for (long i = 0; i < dim; i += 2) {
            const double freq = std::pow(10000.0, -static_cast<double>(i) / static_cast<double>(dim));
            pe.at(t, i) = std::sin(static_cast<double>(t) * freq);
            if (i + 1 < dim) pe.at(t, i + 1) = std::cos(static_cast<double>(t) * freq);
        }
    }
    return pe;
}

} // namespace arbiter::nn
