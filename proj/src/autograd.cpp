#include "hud/autograd.hpp"

#include <cmath>
#include <unordered_set>

namespace hud::ad {

namespace {

NodePtr make_node(Tensor2D value, std::vector<NodePtr> parents) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    bool needs = false;
    for (const auto& p : parents) needs = needs || p->requires_grad;
    n->requires_grad = needs;
    if (needs) n->parents = std::move(parents);
    return n;
}

// Attach the backward closure only when some parent wants gradients, so
// pure-inference graphs stay cheap.
Var finish(NodePtr n, std::function<void(Node&)> bp) {
    if (n->requires_grad) n->backprop = std::move(bp);
    return Var(std::move(n));
}

}  // namespace

Var constant(Tensor2D v) {
    auto n = std::make_shared<Node>();
    n->value = std::move(v);
    n->requires_grad = false;
    return Var(std::move(n));
}

Var leaf(Tensor2D v) {
    auto n = std::make_shared<Node>();
    n->value = std::move(v);
    n->requires_grad = true;
    return Var(std::move(n));
}

Var add(const Var& a, const Var& b) {
    check_same_shape(a.value(), b.value(), "add");
    Tensor2D out = a.value();
    for (size_t i = 0; i < out.size(); ++i) out.data[i] += b.value().data[i];
    auto n = make_node(std::move(out), {a.node(), b.node()});
    return finish(n, [](Node& self) {
        for (int k = 0; k < 2; ++k) {
            Node& p = *self.parents[k];
            if (!p.requires_grad) continue;
            Tensor2D& g = p.grad_buffer();
            for (size_t i = 0; i < g.size(); ++i) g.data[i] += self.grad.data[i];
        }
    });
}

Var sub(const Var& a, const Var& b) {
    check_same_shape(a.value(), b.value(), "sub");
    Tensor2D out = a.value();
    for (size_t i = 0; i < out.size(); ++i) out.data[i] -= b.value().data[i];
    auto n = make_node(std::move(out), {a.node(), b.node()});
    return finish(n, [](Node& self) {
        if (self.parents[0]->requires_grad) {
            Tensor2D& g = self.parents[0]->grad_buffer();
            for (size_t i = 0; i < g.size(); ++i) g.data[i] += self.grad.data[i];
        }
        if (self.parents[1]->requires_grad) {
            Tensor2D& g = self.parents[1]->grad_buffer();
            for (size_t i = 0; i < g.size(); ++i) g.data[i] -= self.grad.data[i];
        }
    });
}

Var mul(const Var& a, const Var& b) {
    check_same_shape(a.value(), b.value(), "mul");
    Tensor2D out = a.value();
    for (size_t i = 0; i < out.size(); ++i) out.data[i] *= b.value().data[i];
    auto n = make_node(std::move(out), {a.node(), b.node()});
    return finish(n, [](Node& self) {
        const Tensor2D& av = self.parents[0]->value;
        const Tensor2D& bv = self.parents[1]->value;
        if (self.parents[0]->requires_grad) {
            Tensor2D& g = self.parents[0]->grad_buffer();
            for (size_t i = 0; i < g.size(); ++i) g.data[i] += self.grad.data[i] * bv.data[i];
        }
        if (self.parents[1]->requires_grad) {
            Tensor2D& g = self.parents[1]->grad_buffer();
            for (size_t i = 0; i < g.size(); ++i) g.data[i] += self.grad.data[i] * av.data[i];
        }
    });
}

Var scale(const Var& a, double c) {
    Tensor2D out = a.value();
    for (auto& v : out.data) v *= c;
    auto n = make_node(std::move(out), {a.node()});
    return finish(n, [c](Node& self) {
        Tensor2D& g = self.parents[0]->grad_buffer();
        for (size_t i = 0; i < g.size(); ++i) g.data[i] += c * self.grad.data[i];
    });
}

Var matmul(const Var& a, const Var& b) {
    Tensor2D out = hud::matmul(a.value(), b.value());
    auto n = make_node(std::move(out), {a.node(), b.node()});
    return finish(n, [](Node& self) {
        const Tensor2D& av = self.parents[0]->value;
        const Tensor2D& bv = self.parents[1]->value;
        const Tensor2D& gy = self.grad;
        if (self.parents[0]->requires_grad) {
            Tensor2D& ga = self.parents[0]->grad_buffer();
            // ga += gy * bv^T
            for (int i = 0; i < ga.rows; ++i)
                for (int j = 0; j < gy.cols; ++j) {
                    double gv = gy.at(i, j);
                    if (gv == 0.0) continue;
                    for (int k = 0; k < ga.cols; ++k) ga.at(i, k) += gv * bv.at(k, j);
                }
        }
        if (self.parents[1]->requires_grad) {
            Tensor2D& gb = self.parents[1]->grad_buffer();
            // gb += av^T * gy
            for (int i = 0; i < av.rows; ++i)
                for (int k = 0; k < gb.rows; ++k) {
                    double av_ik = av.at(i, k);
                    if (av_ik == 0.0) continue;
                    for (int j = 0; j < gb.cols; ++j) gb.at(k, j) += av_ik * gy.at(i, j);
                }
        }
    });
}

Var transpose(const Var& a) {
    auto n = make_node(hud::transpose(a.value()), {a.node()});
    return finish(n, [](Node& self) {
        Tensor2D& g = self.parents[0]->grad_buffer();
        for (int i = 0; i < self.grad.rows; ++i)
            for (int j = 0; j < self.grad.cols; ++j) g.at(j, i) += self.grad.at(i, j);
    });
}

Var add_row(const Var& x, const Var& b) {
    if (b.rows() != 1 || b.cols() != x.cols())
        throw std::runtime_error("add_row: bias must be 1x" + std::to_string(x.cols()));
    Tensor2D out = x.value();
    for (int i = 0; i < out.rows; ++i)
        for (int j = 0; j < out.cols; ++j) out.at(i, j) += b.value().at(0, j);
    auto n = make_node(std::move(out), {x.node(), b.node()});
    return finish(n, [](Node& self) {
        if (self.parents[0]->requires_grad) {
            Tensor2D& g = self.parents[0]->grad_buffer();
            for (size_t i = 0; i < g.size(); ++i) g.data[i] += self.grad.data[i];
        }
        if (self.parents[1]->requires_grad) {
            Tensor2D& g = self.parents[1]->grad_buffer();
            for (int i = 0; i < self.grad.rows; ++i)
                for (int j = 0; j < self.grad.cols; ++j) g.at(0, j) += self.grad.at(i, j);
        }
    });
}

Var sigmoid(const Var& a) {
    Tensor2D out = a.value();
    for (auto& v : out.data) v = 1.0 / (1.0 + std::exp(-v));
    auto n = make_node(std::move(out), {a.node()});
    return finish(n, [](Node& self) {
        Tensor2D& g = self.parents[0]->grad_buffer();
        for (size_t i = 0; i < g.size(); ++i) {
            double y = self.value.data[i];
            g.data[i] += self.grad.data[i] * y * (1.0 - y);
        }
    });
}

Var tanh_op(const Var& a) {
    Tensor2D out = a.value();
    for (auto& v : out.data) v = std::tanh(v);
    auto n = make_node(std::move(out), {a.node()});
    return finish(n, [](Node& self) {
        Tensor2D& g = self.parents[0]->grad_buffer();
        for (size_t i = 0; i < g.size(); ++i) {
            double y = self.value.data[i];
            g.data[i] += self.grad.data[i] * (1.0 - y * y);
        }
    });
}

Var exp_op(const Var& a) {
    Tensor2D out = a.value();
    for (auto& v : out.data) v = std::exp(v);
    auto n = make_node(std::move(out), {a.node()});
    return finish(n, [](Node& self) {
        Tensor2D& g = self.parents[0]->grad_buffer();
        for (size_t i = 0; i < g.size(); ++i)
            g.data[i] += self.grad.data[i] * self.value.data[i];
    });
}

Var log_op(const Var& a) {
    Tensor2D out = a.value();
    for (auto& v : out.data) {
        if (v <= 0.0) throw std::runtime_error("log: non-positive input");
        v = std::log(v);
    }
    auto n = make_node(std::move(out), {a.node()});
    return finish(n, [](Node& self) {
        const Tensor2D& x = self.parents[0]->value;
        Tensor2D& g = self.parents[0]->grad_buffer();
        for (size_t i = 0; i < g.size(); ++i) g.data[i] += self.grad.data[i] / x.data[i];
    });
}

Var softmax_rows(const Var& a) {
    Tensor2D out = hud::softmax_rows(a.value());
    auto n = make_node(std::move(out), {a.node()});
    return finish(n, [](Node& self) {
        Tensor2D& g = self.parents[0]->grad_buffer();
        const Tensor2D& y = self.value;
        for (int i = 0; i < y.rows; ++i) {
            double dot = 0.0;
            for (int j = 0; j < y.cols; ++j) dot += self.grad.at(i, j) * y.at(i, j);
            for (int j = 0; j < y.cols; ++j)
                g.at(i, j) += y.at(i, j) * (self.grad.at(i, j) - dot);
        }
    });
}

Var log_softmax_rows(const Var& a) {
    Tensor2D out = hud::log_softmax_rows(a.value());
    auto n = make_node(std::move(out), {a.node()});
    return finish(n, [](Node& self) {
        Tensor2D& g = self.parents[0]->grad_buffer();
        const Tensor2D& y = self.value;  // log-probabilities
        for (int i = 0; i < y.rows; ++i) {
            double sum = 0.0;
            for (int j = 0; j < y.cols; ++j) sum += self.grad.at(i, j);
            for (int j = 0; j < y.cols; ++j)
                g.at(i, j) += self.grad.at(i, j) - std::exp(y.at(i, j)) * sum;
        }
    });
}

Var layer_norm_rows(const Var& x, const Var& gain, const Var& bias, double eps) {
    int C = x.cols();
    if (gain.rows() != 1 || gain.cols() != C || bias.rows() != 1 || bias.cols() != C)
        throw std::runtime_error("layer_norm_rows: gain/bias must be 1x" + std::to_string(C));
    if (eps < 0.0) throw std::invalid_argument("layer_norm_rows: negative eps");
    const Tensor2D& xv = x.value();
    Tensor2D out(xv.rows, C);
    for (int i = 0; i < xv.rows; ++i) {
        double mean = 0.0;
        for (int j = 0; j < C; ++j) mean += xv.at(i, j);
        mean /= C;
        double var = 0.0;
        for (int j = 0; j < C; ++j) {
            double d = xv.at(i, j) - mean;
            var += d * d;
        }
        var /= C;
        double denom = std::sqrt(var + eps);
        if (denom == 0.0) throw std::runtime_error("layer_norm_rows: zero variance with eps=0");
        for (int j = 0; j < C; ++j)
            out.at(i, j) = gain.value().at(0, j) * ((xv.at(i, j) - mean) / denom) +
                           bias.value().at(0, j);
    }
    auto n = make_node(std::move(out), {x.node(), gain.node(), bias.node()});
    return finish(n, [eps, C](Node& self) {
        const Tensor2D& xv = self.parents[0]->value;
        const Tensor2D& gv = self.parents[1]->value;
        for (int i = 0; i < xv.rows; ++i) {
            double mean = 0.0;
            for (int j = 0; j < C; ++j) mean += xv.at(i, j);
            mean /= C;
            double var = 0.0;
            for (int j = 0; j < C; ++j) {
                double d = xv.at(i, j) - mean;
                var += d * d;
            }
            var /= C;
            double denom = std::sqrt(var + eps);
            // dL/dxhat, plus the two reduction terms of the layer-norm backward
            double sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
            for (int j = 0; j < C; ++j) {
                double xhat = (xv.at(i, j) - mean) / denom;
                double dxhat = self.grad.at(i, j) * gv.at(0, j);
                sum_dxhat += dxhat;
                sum_dxhat_xhat += dxhat * xhat;
            }
            if (self.parents[0]->requires_grad) {
                Tensor2D& gx = self.parents[0]->grad_buffer();
                for (int j = 0; j < C; ++j) {
                    double xhat = (xv.at(i, j) - mean) / denom;
                    double dxhat = self.grad.at(i, j) * gv.at(0, j);
                    gx.at(i, j) +=
                        (dxhat - sum_dxhat / C - xhat * sum_dxhat_xhat / C) / denom;
                }
            }
            if (self.parents[1]->requires_grad) {
                Tensor2D& gg = self.parents[1]->grad_buffer();
                for (int j = 0; j < C; ++j) {
                    double xhat = (xv.at(i, j) - mean) / denom;
                    gg.at(0, j) += self.grad.at(i, j) * xhat;
                }
            }
            if (self.parents[2]->requires_grad) {
                Tensor2D& gb = self.parents[2]->grad_buffer();
                for (int j = 0; j < C; ++j) gb.at(0, j) += self.grad.at(i, j);
            }
        }
    });
}

Var concat_rows(const std::vector<Var>& parts) {
    if (parts.empty()) throw std::invalid_argument("concat_rows: empty input");
    int cols = parts[0].cols();
    int rows = 0;
    for (const auto& p : parts) {
        if (p.cols() != cols) throw std::runtime_error("concat_rows: column mismatch");
        rows += p.rows();
    }
    Tensor2D out(rows, cols);
    std::vector<NodePtr> parents;
    int r = 0;
    for (const auto& p : parts) {
        for (int i = 0; i < p.rows(); ++i)
            for (int j = 0; j < cols; ++j) out.at(r + i, j) = p.value().at(i, j);
        r += p.rows();
        parents.push_back(p.node());
    }
    auto n = make_node(std::move(out), std::move(parents));
    return finish(n, [](Node& self) {
        int r = 0;
        for (auto& pp : self.parents) {
            if (pp->requires_grad) {
                Tensor2D& g = pp->grad_buffer();
                for (int i = 0; i < g.rows; ++i)
                    for (int j = 0; j < g.cols; ++j) g.at(i, j) += self.grad.at(r + i, j);
            }
            r += pp->value.rows;
        }
    });
}

Var concat_cols(const std::vector<Var>& parts) {
    if (parts.empty()) throw std::invalid_argument("concat_cols: empty input");
    int rows = parts[0].rows();
    int cols = 0;
    for (const auto& p : parts) {
        if (p.rows() != rows) throw std::runtime_error("concat_cols: row count mismatch");
        cols += p.cols();
    }
    Tensor2D out(rows, cols);
    std::vector<NodePtr> parents;
    int c = 0;
    for (const auto& p : parts) {
        for (int i = 0; i < rows; ++i)
            for (int j = 0; j < p.cols(); ++j) out.at(i, c + j) = p.value().at(i, j);
        c += p.cols();
        parents.push_back(p.node());
    }
    auto n = make_node(std::move(out), std::move(parents));
    return finish(n, [](Node& self) {
        int c = 0;
        for (auto& pp : self.parents) {
            if (pp->requires_grad) {
                Tensor2D& g = pp->grad_buffer();
                for (int i = 0; i < g.rows; ++i)
                    for (int j = 0; j < g.cols; ++j) g.at(i, j) += self.grad.at(i, c + j);
            }
            c += pp->value.cols;
        }
    });
}

Var slice_rows(const Var& a, int begin, int end) {
    if (begin < 0 || end > a.rows() || begin >= end)
        throw std::runtime_error("slice_rows: bad range");
    Tensor2D out(end - begin, a.cols());
    for (int i = 0; i < out.rows; ++i)
        for (int j = 0; j < out.cols; ++j) out.at(i, j) = a.value().at(begin + i, j);
    auto n = make_node(std::move(out), {a.node()});
    return finish(n, [begin](Node& self) {
        Tensor2D& g = self.parents[0]->grad_buffer();
        for (int i = 0; i < self.grad.rows; ++i)
            for (int j = 0; j < self.grad.cols; ++j) g.at(begin + i, j) += self.grad.at(i, j);
    });
}

Var slice_cols(const Var& a, int begin, int end) {
    if (begin < 0 || end > a.cols() || begin >= end)
        throw std::runtime_error("slice_cols: bad range");
    Tensor2D out(a.rows(), end - begin);
    for (int i = 0; i < out.rows; ++i)
        for (int j = 0; j < out.cols; ++j) out.at(i, j) = a.value().at(i, begin + j);
    auto n = make_node(std::move(out), {a.node()});
    return finish(n, [begin](Node& self) {
        Tensor2D& g = self.parents[0]->grad_buffer();
        for (int i = 0; i < self.grad.rows; ++i)
            for (int j = 0; j < self.grad.cols; ++j) g.at(i, begin + j) += self.grad.at(i, j);
    });
}

Var repeat_rows(const Var& row, int n_times) {
    if (row.rows() != 1) throw std::runtime_error("repeat_rows: expects a 1xC row");
    if (n_times <= 0) throw std::invalid_argument("repeat_rows: count must be positive");
    Tensor2D out(n_times, row.cols());
    for (int i = 0; i < n_times; ++i)
        for (int j = 0; j < out.cols; ++j) out.at(i, j) = row.value().at(0, j);
    auto n = make_node(std::move(out), {row.node()});
    return finish(n, [](Node& self) {
        Tensor2D& g = self.parents[0]->grad_buffer();
        for (int i = 0; i < self.grad.rows; ++i)
            for (int j = 0; j < self.grad.cols; ++j) g.at(0, j) += self.grad.at(i, j);
    });
}

Var mean_over_rows(const Var& a) {
    if (a.rows() == 0) throw std::runtime_error("mean_over_rows: empty input");
    Tensor2D out(1, a.cols());
    for (int j = 0; j < a.cols(); ++j) {
        double s = 0.0;
        for (int i = 0; i < a.rows(); ++i) s += a.value().at(i, j);
        out.at(0, j) = s / a.rows();
    }
    auto n = make_node(std::move(out), {a.node()});
    return finish(n, [](Node& self) {
        Tensor2D& g = self.parents[0]->grad_buffer();
        double inv = 1.0 / g.rows;
        for (int i = 0; i < g.rows; ++i)
            for (int j = 0; j < g.cols; ++j) g.at(i, j) += self.grad.at(0, j) * inv;
    });
}

Var l2_normalize_rows(const Var& a) {
    Tensor2D out = hud::l2_normalize_rows(a.value());
    auto n = make_node(std::move(out), {a.node()});
    return finish(n, [](Node& self) {
        const Tensor2D& x = self.parents[0]->value;
        const Tensor2D& y = self.value;
        Tensor2D& g = self.parents[0]->grad_buffer();
        for (int i = 0; i < x.rows; ++i) {
            double norm = 0.0;
            for (int j = 0; j < x.cols; ++j) norm += x.at(i, j) * x.at(i, j);
            norm = std::sqrt(norm);
            double dot = 0.0;
            for (int j = 0; j < x.cols; ++j) dot += self.grad.at(i, j) * y.at(i, j);
            for (int j = 0; j < x.cols; ++j)
                g.at(i, j) += (self.grad.at(i, j) - y.at(i, j) * dot) / norm;
        }
    });
}

Var rowwise_max(const Var& a) {
    Tensor2D out(1, a.rows());
    std::vector<int> argmax(a.rows());
    for (int i = 0; i < a.rows(); ++i) {
        int best = 0;
        double bv = a.value().at(i, 0);
        for (int j = 1; j < a.cols(); ++j)
            if (a.value().at(i, j) > bv) {
                bv = a.value().at(i, j);
                best = j;
            }
        out.at(0, i) = bv;
        argmax[i] = best;
    }
    auto n = make_node(std::move(out), {a.node()});
    return finish(n, [argmax](Node& self) {
        Tensor2D& g = self.parents[0]->grad_buffer();
        for (int i = 0; i < g.rows; ++i) g.at(i, argmax[i]) += self.grad.at(0, i);
    });
}

Var diag(const Var& a) {
    if (a.rows() != a.cols()) throw std::runtime_error("diag: matrix must be square");
    Tensor2D out(1, a.rows());
    for (int i = 0; i < a.rows(); ++i) out.at(0, i) = a.value().at(i, i);
    auto n = make_node(std::move(out), {a.node()});
    return finish(n, [](Node& self) {
        Tensor2D& g = self.parents[0]->grad_buffer();
        for (int i = 0; i < g.rows; ++i) g.at(i, i) += self.grad.at(0, i);
    });
}

Var sum_all(const Var& a) {
    Tensor2D out(1, 1);
    for (double v : a.value().data) out.data[0] += v;
    auto n = make_node(std::move(out), {a.node()});
    return finish(n, [](Node& self) {
        Tensor2D& g = self.parents[0]->grad_buffer();
        for (auto& v : g.data) v += self.grad.data[0];
    });
}

Var mean_all(const Var& a) {
    Tensor2D out(1, 1);
    for (double v : a.value().data) out.data[0] += v;
    out.data[0] /= static_cast<double>(a.value().size());
    auto n = make_node(std::move(out), {a.node()});
    return finish(n, [](Node& self) {
        Tensor2D& g = self.parents[0]->grad_buffer();
        double inv = 1.0 / static_cast<double>(g.size());
        for (auto& v : g.data) v += self.grad.data[0] * inv;
    });
}

Var gather_rows(const Var& table, const std::vector<int>& indices) {
    Tensor2D out(static_cast<int>(indices.size()), table.cols());
    for (size_t i = 0; i < indices.size(); ++i) {
        int r = indices[i];
        if (r < 0 || r >= table.rows())
            throw std::runtime_error("gather_rows: index " + std::to_string(r) +
                                     " out of range for " + std::to_string(table.rows()) +
                                     " rows");
        for (int j = 0; j < table.cols(); ++j) out.at(static_cast<int>(i), j) = table.value().at(r, j);
    }
    auto n = make_node(std::move(out), {table.node()});
    return finish(n, [indices](Node& self) {
        Tensor2D& g = self.parents[0]->grad_buffer();
        for (size_t i = 0; i < indices.size(); ++i)
            for (int j = 0; j < g.cols; ++j)
                g.at(indices[i], j) += self.grad.at(static_cast<int>(i), j);
    });
}

Var from_scalars(int rows, int cols, const std::vector<Var>& cells) {
    if (static_cast<int>(cells.size()) != rows * cols)
        throw std::runtime_error("from_scalars: need rows*cols cells");
    Tensor2D out(rows, cols);
    std::vector<NodePtr> parents;
    parents.reserve(cells.size());
    for (size_t i = 0; i < cells.size(); ++i) {
        if (cells[i].rows() != 1 || cells[i].cols() != 1)
            throw std::runtime_error("from_scalars: cells must be 1x1");
        out.data[i] = cells[i].value().data[0];
        parents.push_back(cells[i].node());
    }
    auto n = make_node(std::move(out), std::move(parents));
    return finish(n, [](Node& self) {
        for (size_t i = 0; i < self.parents.size(); ++i)
            if (self.parents[i]->requires_grad)
                self.parents[i]->grad_buffer().data[0] += self.grad.data[i];
    });
}

void backward(const Var& root) {
    if (!root.defined()) throw std::runtime_error("backward: undefined root");
    if (root.rows() != 1 || root.cols() != 1)
        throw std::runtime_error("backward: root must be a 1x1 scalar");

    // Iterative post-order DFS; parents precede children in `order`.
    std::vector<Node*> order;
    std::unordered_set<Node*> seen;
    std::vector<std::pair<Node*, size_t>> stack;
    stack.emplace_back(root.node().get(), 0);
    seen.insert(root.node().get());
    while (!stack.empty()) {
        auto& [node, idx] = stack.back();
        if (idx < node->parents.size()) {
            Node* p = node->parents[idx].get();
            ++idx;
            if (p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    root.node()->grad_buffer().data[0] = 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* n = *it;
        if (n->backprop) {
            n->grad_buffer();  // ensure allocated even if nothing flowed here
            n->backprop(*n);
        }
    }
}

}  // namespace hud::ad
