// SPDX-License-Identifier: Apache-2.0
#include "dot/tape.hpp"

#include <cmath>
#include <stdexcept>

namespace dot {

namespace {

void require_rank2(const Tensor& t, const char* op) {
    if (t.rank() != 2) {
        throw std::invalid_argument(std::string(op) + ": expected a rank-2 tensor, got shape " + shape_str(t.shape()));
    }
}

}  // namespace

NodeId Tape::push(Node node) {
    nodes_.push_back(std::move(node));
    return nodes_.size() - 1;
}

const Tape::Node& Tape::node(NodeId id) const {
    if (id >= nodes_.size()) throw std::out_of_range("Tape: node id out of range");
    return nodes_[id];
}

Tensor& Tape::grad_at(std::vector<Tensor>& grads, NodeId id) {
    // Default-constructed tensors have size 0; any live tensor has size >= 1,
    // so an empty slot means "not yet touched by any pullback".
    if (grads[id].size() == 0) grads[id] = Tensor(nodes_[id].value.shape());
    return grads[id];
}

NodeId Tape::constant(Tensor value) {
    Node n;
    n.value = std::move(value);
    return push(std::move(n));
}

NodeId Tape::parameter(const std::string& name, Tensor value) {
    if (name.empty()) throw std::invalid_argument("Tape::parameter: empty name");
    for (NodeId id : parameter_ids_) {
        if (nodes_[id].name == name) {
            throw std::invalid_argument("Tape::parameter: duplicate name '" + name + "'");
        }
    }
    Node n;
    n.value = std::move(value);
    n.requires_grad = true;
    n.name = name;
    NodeId id = push(std::move(n));
    parameter_ids_.push_back(id);
    return id;
}

NodeId Tape::affine(NodeId input, NodeId weight, NodeId bias) {
    const Tensor& x = node(input).value;
    const Tensor& w = node(weight).value;
    const Tensor& b = node(bias).value;
    require_rank2(x, "affine input");
    require_rank2(w, "affine weight");
    if (b.rank() != 1) {
        throw std::invalid_argument("affine: bias must be rank-1, got shape " + shape_str(b.shape()));
    }
    if (x.dim(1) != w.dim(0) || w.dim(1) != b.dim(0)) {
        throw std::invalid_argument("affine: nonconforming shapes input " + shape_str(x.shape()) + ", weight " +
                                    shape_str(w.shape()) + ", bias " + shape_str(b.shape()));
    }
    const std::size_t batch = x.dim(0), in = x.dim(1), out_dim = w.dim(1);
    Tensor out({batch, out_dim});
    for (std::size_t bi = 0; bi < batch; ++bi) {
        double* orow = out.data() + bi * out_dim;
        for (std::size_t o = 0; o < out_dim; ++o) orow[o] = b[o];
        const double* xrow = x.data() + bi * in;
        for (std::size_t i = 0; i < in; ++i) {
            const double xv = xrow[i];
            const double* wrow = w.data() + i * out_dim;
            for (std::size_t o = 0; o < out_dim; ++o) orow[o] += xv * wrow[o];
        }
    }

    Node n;
    n.value = std::move(out);
    n.requires_grad = node(input).requires_grad || node(weight).requires_grad || node(bias).requires_grad;
    n.pullback = [this, input, weight, bias, batch, in, out_dim](const Tensor& gout, std::vector<Tensor>& grads) {
        const Tensor& x = nodes_[input].value;
        const Tensor& w = nodes_[weight].value;
        if (nodes_[input].requires_grad) {
            Tensor& gx = grad_at(grads, input);
            for (std::size_t bi = 0; bi < batch; ++bi) {
                const double* grow = gout.data() + bi * out_dim;
                double* gxrow = gx.data() + bi * in;
                for (std::size_t i = 0; i < in; ++i) {
                    const double* wrow = w.data() + i * out_dim;
                    double acc = 0.0;
                    for (std::size_t o = 0; o < out_dim; ++o) acc += grow[o] * wrow[o];
                    gxrow[i] += acc;
                }
            }
        }
        if (nodes_[weight].requires_grad) {
            Tensor& gw = grad_at(grads, weight);
            for (std::size_t bi = 0; bi < batch; ++bi) {
                const double* xrow = x.data() + bi * in;
                const double* grow = gout.data() + bi * out_dim;
                for (std::size_t i = 0; i < in; ++i) {
                    const double xv = xrow[i];
                    double* gwrow = gw.data() + i * out_dim;
                    for (std::size_t o = 0; o < out_dim; ++o) gwrow[o] += xv * grow[o];
                }
            }
        }
        if (nodes_[bias].requires_grad) {
            Tensor& gb = grad_at(grads, bias);
            for (std::size_t bi = 0; bi < batch; ++bi) {
                const double* grow = gout.data() + bi * out_dim;
                for (std::size_t o = 0; o < out_dim; ++o) gb[o] += grow[o];
            }
        }
    };
    return push(std::move(n));
}

NodeId Tape::relu(NodeId x) {
    const Tensor& in = node(x).value;
    Tensor out(in.shape());
    for (std::size_t i = 0; i < in.size(); ++i) out[i] = in[i] > 0.0 ? in[i] : 0.0;

    Node n;
    n.value = std::move(out);
    n.requires_grad = node(x).requires_grad;
    n.pullback = [this, x](const Tensor& gout, std::vector<Tensor>& grads) {
        if (!nodes_[x].requires_grad) return;
        const Tensor& in = nodes_[x].value;
        Tensor& gx = grad_at(grads, x);
        for (std::size_t i = 0; i < in.size(); ++i) {
            if (in[i] > 0.0) gx[i] += gout[i];
        }
    };
    return push(std::move(n));
}

NodeId Tape::softmax(NodeId logits, double temperature) {
    if (!(temperature > 0.0)) throw std::invalid_argument("softmax: temperature must be positive");
    const Tensor& z = node(logits).value;
    require_rank2(z, "softmax");
    const std::size_t batch = z.dim(0), classes = z.dim(1);
    Tensor out({batch, classes});
    for (std::size_t b = 0; b < batch; ++b) {
        const double* row = z.data() + b * classes;
        double* orow = out.data() + b * classes;
        double mx = row[0];
        for (std::size_t c = 1; c < classes; ++c) mx = std::max(mx, row[c]);
        double sum = 0.0;
        for (std::size_t c = 0; c < classes; ++c) {
            orow[c] = std::exp((row[c] - mx) / temperature);
            sum += orow[c];
        }
        for (std::size_t c = 0; c < classes; ++c) orow[c] /= sum;
    }

    NodeId self_placeholder = nodes_.size();  // id the new node will take
    Node n;
    n.value = std::move(out);
    n.requires_grad = node(logits).requires_grad;
    n.pullback = [this, logits, temperature, self_placeholder, batch, classes](const Tensor& gout,
                                                                               std::vector<Tensor>& grads) {
        if (!nodes_[logits].requires_grad) return;
        const Tensor& s = nodes_[self_placeholder].value;
        Tensor& gz = grad_at(grads, logits);
        for (std::size_t b = 0; b < batch; ++b) {
            const double* srow = s.data() + b * classes;
            const double* grow = gout.data() + b * classes;
            double dot_gs = 0.0;
            for (std::size_t c = 0; c < classes; ++c) dot_gs += grow[c] * srow[c];
            double* gzrow = gz.data() + b * classes;
            for (std::size_t c = 0; c < classes; ++c) {
                gzrow[c] += srow[c] * (grow[c] - dot_gs) / temperature;
            }
        }
    };
    return push(std::move(n));
}

NodeId Tape::log_softmax(NodeId logits, double temperature) {
    if (!(temperature > 0.0)) throw std::invalid_argument("log_softmax: temperature must be positive");
    const Tensor& z = node(logits).value;
    require_rank2(z, "log_softmax");
    const std::size_t batch = z.dim(0), classes = z.dim(1);
    Tensor out({batch, classes});
    for (std::size_t b = 0; b < batch; ++b) {
        const double* row = z.data() + b * classes;
        double* orow = out.data() + b * classes;
        double mx = row[0];
        for (std::size_t c = 1; c < classes; ++c) mx = std::max(mx, row[c]);
        double sum = 0.0;
        for (std::size_t c = 0; c < classes; ++c) sum += std::exp((row[c] - mx) / temperature);
        const double log_z = std::log(sum);
        for (std::size_t c = 0; c < classes; ++c) orow[c] = (row[c] - mx) / temperature - log_z;
    }

    NodeId self_placeholder = nodes_.size();
    Node n;
    n.value = std::move(out);
    n.requires_grad = node(logits).requires_grad;
    n.pullback = [this, logits, temperature, self_placeholder, batch, classes](const Tensor& gout,
                                                                               std::vector<Tensor>& grads) {
        if (!nodes_[logits].requires_grad) return;
        const Tensor& ls = nodes_[self_placeholder].value;
        Tensor& gz = grad_at(grads, logits);
        for (std::size_t b = 0; b < batch; ++b) {
            const double* lsrow = ls.data() + b * classes;
            const double* grow = gout.data() + b * classes;
            double gsum = 0.0;
            for (std::size_t c = 0; c < classes; ++c) gsum += grow[c];
            double* gzrow = gz.data() + b * classes;
            for (std::size_t c = 0; c < classes; ++c) {
                gzrow[c] += (grow[c] - std::exp(lsrow[c]) * gsum) / temperature;
            }
        }
    };
    return push(std::move(n));
}

NodeId Tape::add(NodeId a, NodeId b) {
    const Tensor& ta = node(a).value;
    const Tensor& tb = node(b).value;
    require_same_shape(ta, tb, "add");
    Tensor out(ta.shape());
    for (std::size_t i = 0; i < ta.size(); ++i) out[i] = ta[i] + tb[i];

    Node n;
    n.value = std::move(out);
    n.requires_grad = node(a).requires_grad || node(b).requires_grad;
    n.pullback = [this, a, b](const Tensor& gout, std::vector<Tensor>& grads) {
        if (nodes_[a].requires_grad) {
            Tensor& ga = grad_at(grads, a);
            for (std::size_t i = 0; i < gout.size(); ++i) ga[i] += gout[i];
        }
        if (nodes_[b].requires_grad) {
            Tensor& gb = grad_at(grads, b);
            for (std::size_t i = 0; i < gout.size(); ++i) gb[i] += gout[i];
        }
    };
    return push(std::move(n));
}

NodeId Tape::sub(NodeId a, NodeId b) {
    const Tensor& ta = node(a).value;
    const Tensor& tb = node(b).value;
    require_same_shape(ta, tb, "sub");
    Tensor out(ta.shape());
    for (std::size_t i = 0; i < ta.size(); ++i) out[i] = ta[i] - tb[i];

    Node n;
    n.value = std::move(out);
    n.requires_grad = node(a).requires_grad || node(b).requires_grad;
    n.pullback = [this, a, b](const Tensor& gout, std::vector<Tensor>& grads) {
        if (nodes_[a].requires_grad) {
            Tensor& ga = grad_at(grads, a);
            for (std::size_t i = 0; i < gout.size(); ++i) ga[i] += gout[i];
        }
        if (nodes_[b].requires_grad) {
            Tensor& gb = grad_at(grads, b);
            for (std::size_t i = 0; i < gout.size(); ++i) gb[i] -= gout[i];
        }
    };
    return push(std::move(n));
}

NodeId Tape::mul(NodeId a, NodeId b) {
    const Tensor& ta = node(a).value;
    const Tensor& tb = node(b).value;
    require_same_shape(ta, tb, "mul");
    Tensor out(ta.shape());
    for (std::size_t i = 0; i < ta.size(); ++i) out[i] = ta[i] * tb[i];

    Node n;
    n.value = std::move(out);
    n.requires_grad = node(a).requires_grad || node(b).requires_grad;
    n.pullback = [this, a, b](const Tensor& gout, std::vector<Tensor>& grads) {
        const Tensor& ta = nodes_[a].value;
        const Tensor& tb = nodes_[b].value;
        if (nodes_[a].requires_grad) {
            Tensor& ga = grad_at(grads, a);
            for (std::size_t i = 0; i < gout.size(); ++i) ga[i] += gout[i] * tb[i];
        }
        if (nodes_[b].requires_grad) {
            Tensor& gb = grad_at(grads, b);
            for (std::size_t i = 0; i < gout.size(); ++i) gb[i] += gout[i] * ta[i];
        }
    };
    return push(std::move(n));
}

NodeId Tape::scale(NodeId x, double factor) {
    const Tensor& in = node(x).value;
    Tensor out(in.shape());
    for (std::size_t i = 0; i < in.size(); ++i) out[i] = factor * in[i];

    Node n;
    n.value = std::move(out);
    n.requires_grad = node(x).requires_grad;
    n.pullback = [this, x, factor](const Tensor& gout, std::vector<Tensor>& grads) {
        if (!nodes_[x].requires_grad) return;
        Tensor& gx = grad_at(grads, x);
        for (std::size_t i = 0; i < gout.size(); ++i) gx[i] += factor * gout[i];
    };
    return push(std::move(n));
}

NodeId Tape::pick(NodeId x, const std::vector<std::size_t>& columns) {
    const Tensor& in = node(x).value;
    require_rank2(in, "pick");
    const std::size_t batch = in.dim(0), classes = in.dim(1);
    if (columns.size() != batch) {
        throw std::invalid_argument("pick: need one column per row, got " + std::to_string(columns.size()) +
                                    " for shape " + shape_str(in.shape()));
    }
    for (std::size_t c : columns) {
        if (c >= classes) {
            throw std::invalid_argument("pick: column " + std::to_string(c) + " out of range for shape " +
                                        shape_str(in.shape()));
        }
    }
    Tensor out({batch});
    for (std::size_t b = 0; b < batch; ++b) out[b] = in.at(b, columns[b]);

    Node n;
    n.value = std::move(out);
    n.requires_grad = node(x).requires_grad;
    n.pullback = [this, x, columns, batch](const Tensor& gout, std::vector<Tensor>& grads) {
        if (!nodes_[x].requires_grad) return;
        Tensor& gx = grad_at(grads, x);
        for (std::size_t b = 0; b < batch; ++b) gx.at(b, columns[b]) += gout[b];
    };
    return push(std::move(n));
}

NodeId Tape::sum_rows(NodeId x) {
    const Tensor& in = node(x).value;
    require_rank2(in, "sum_rows");
    const std::size_t batch = in.dim(0), cols = in.dim(1);
    Tensor out({batch});
    for (std::size_t b = 0; b < batch; ++b) {
        const double* row = in.data() + b * cols;
        double acc = 0.0;
        for (std::size_t c = 0; c < cols; ++c) acc += row[c];
        out[b] = acc;
    }

    Node n;
    n.value = std::move(out);
    n.requires_grad = node(x).requires_grad;
    n.pullback = [this, x, batch, cols](const Tensor& gout, std::vector<Tensor>& grads) {
        if (!nodes_[x].requires_grad) return;
        Tensor& gx = grad_at(grads, x);
        for (std::size_t b = 0; b < batch; ++b) {
            double* row = gx.data() + b * cols;
            for (std::size_t c = 0; c < cols; ++c) row[c] += gout[b];
        }
    };
    return push(std::move(n));
}

NodeId Tape::mean_all(NodeId x) {
    const Tensor& in = node(x).value;
    if (in.size() == 0) throw std::invalid_argument("mean_all: empty tensor");
    double acc = 0.0;
    for (std::size_t i = 0; i < in.size(); ++i) acc += in[i];
    const double inv_n = 1.0 / static_cast<double>(in.size());

    Node n;
    n.value = Tensor::scalar(acc * inv_n);
    n.requires_grad = node(x).requires_grad;
    n.pullback = [this, x, inv_n](const Tensor& gout, std::vector<Tensor>& grads) {
        if (!nodes_[x].requires_grad) return;
        Tensor& gx = grad_at(grads, x);
        const double g = gout[0] * inv_n;
        for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g;
    };
    return push(std::move(n));
}

const Tensor& Tape::value(NodeId id) const { return node(id).value; }

double Tape::scalar_value(NodeId id) const {
    const Tensor& t = node(id).value;
    if (t.rank() != 0) {
        throw std::invalid_argument("Tape::scalar_value: node has shape " + shape_str(t.shape()));
    }
    return t[0];
}

TensorMap Tape::backward(NodeId output) {
    if (consumed_) throw std::logic_error("Tape::backward: tape already consumed");
    const Tensor& out = node(output).value;
    if (out.rank() != 0) {
        throw std::invalid_argument("Tape::backward: output must be rank-0, got shape " + shape_str(out.shape()));
    }
    consumed_ = true;

    std::vector<Tensor> grads(nodes_.size());
    grad_at(grads, output)[0] = 1.0;

    // Creation order is a topological order, so one reverse sweep visits
    // every reachable node after all of its consumers. Nodes without an
    // accumulated gradient are off the output's dependency cone.
    for (std::size_t i = output + 1; i-- > 0;) {
        const Node& n = nodes_[i];
        if (!n.pullback || !n.requires_grad || grads[i].size() == 0) continue;
        n.pullback(grads[i], grads);
    }

    TensorMap result;
    for (NodeId id : parameter_ids_) {
        if (grads[id].size() != 0) {
            result.add(nodes_[id].name, std::move(grads[id]));
        } else {
            result.add(nodes_[id].name, Tensor(nodes_[id].value.shape()));
        }
    }
    return result;
}

}  // namespace dot
