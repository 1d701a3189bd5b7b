#include "tubeground/graph.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "tubeground/errors.hpp"

namespace tubeground {
namespace {

constexpr double kSqrt2 = 1.4142135623730950488;
constexpr double kInvSqrt2Pi = 0.3989422804014326779;

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (!a.same_shape(b)) {
    throw ContractViolation(std::string(op) + ": shape mismatch " + a.shape_str() +
                            " vs " + b.shape_str());
  }
}

}  // namespace

Var Graph::emplace(Tensor value, std::vector<std::uint32_t> parents,
                   std::function<void(Graph&, std::uint32_t)> backprop) {
  Node n;
  n.value = std::move(value);
  n.grad = Tensor(n.value.shape());
  n.parents = std::move(parents);
  n.backprop = std::move(backprop);
  nodes_.push_back(std::move(n));
  return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Var Graph::constant(Tensor value) {
  return emplace(std::move(value), {}, nullptr);
}

Var Graph::param(Parameter& p) {
  Var v = emplace(p.value, {}, nullptr);
  bound_params_.emplace_back(v.index, &p);
  return v;
}

Var Graph::add(Var a, Var b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  check_same_shape(ta, tb, "add");
  Tensor out = ta;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += tb[i];
  return emplace(std::move(out), {a.index, b.index}, [](Graph& g, std::uint32_t self) {
    Node& n = g.node(self);
    for (const std::uint32_t p : n.parents) {
      Tensor& pg = g.node(p).grad;
      for (std::size_t i = 0; i < pg.size(); ++i) pg[i] += n.grad[i];
    }
  });
}

Var Graph::sub(Var a, Var b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  check_same_shape(ta, tb, "sub");
  Tensor out = ta;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= tb[i];
  return emplace(std::move(out), {a.index, b.index}, [](Graph& g, std::uint32_t self) {
    Node& n = g.node(self);
    Tensor& ga = g.node(n.parents[0]).grad;
    Tensor& gb = g.node(n.parents[1]).grad;
    for (std::size_t i = 0; i < ga.size(); ++i) {
      ga[i] += n.grad[i];
      gb[i] -= n.grad[i];
    }
  });
}

Var Graph::mul(Var a, Var b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  check_same_shape(ta, tb, "mul");
  Tensor out = ta;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= tb[i];
  return emplace(std::move(out), {a.index, b.index}, [](Graph& g, std::uint32_t self) {
    Node& n = g.node(self);
    Node& na = g.node(n.parents[0]);
    Node& nb = g.node(n.parents[1]);
    for (std::size_t i = 0; i < n.grad.size(); ++i) {
      na.grad[i] += n.grad[i] * nb.value[i];
      nb.grad[i] += n.grad[i] * na.value[i];
    }
  });
}

Var Graph::scale(Var a, double c) {
  Tensor out = value(a);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= c;
  return emplace(std::move(out), {a.index}, [c](Graph& g, std::uint32_t self) {
    Node& n = g.node(self);
    Tensor& pg = g.node(n.parents[0]).grad;
    for (std::size_t i = 0; i < pg.size(); ++i) pg[i] += c * n.grad[i];
  });
}

Var Graph::matmul(Var a, Var b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  if (ta.rank() != 2 || tb.rank() != 2 || ta.dim(1) != tb.dim(0)) {
    throw ContractViolation("matmul: incompatible shapes " + ta.shape_str() + " x " +
                            tb.shape_str());
  }
  const std::size_t r = ta.dim(0);
  const std::size_t k = ta.dim(1);
  const std::size_t c = tb.dim(1);
  Tensor out({r, c});
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t kk = 0; kk < k; ++kk) {
      const double aik = ta.at(i, kk);
      if (aik == 0.0) continue;
      for (std::size_t j = 0; j < c; ++j) out.at(i, j) += aik * tb.at(kk, j);
    }
  }
  return emplace(std::move(out), {a.index, b.index}, [r, k, c](Graph& g, std::uint32_t self) {
    Node& n = g.node(self);
    Node& na = g.node(n.parents[0]);
    Node& nb = g.node(n.parents[1]);
    // dA = G * B^T ; dB = A^T * G
    for (std::size_t i = 0; i < r; ++i) {
      for (std::size_t j = 0; j < c; ++j) {
        const double gij = n.grad.at(i, j);
        if (gij == 0.0) continue;
        for (std::size_t kk = 0; kk < k; ++kk) {
          na.grad.at(i, kk) += gij * nb.value.at(kk, j);
          nb.grad.at(kk, j) += gij * na.value.at(i, kk);
        }
      }
    }
  });
}

Var Graph::transpose(Var a) {
  const Tensor& ta = value(a);
  if (ta.rank() != 2) throw ContractViolation("transpose: rank-2 tensor required");
  const std::size_t r = ta.dim(0);
  const std::size_t c = ta.dim(1);
  Tensor out({c, r});
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < c; ++j) out.at(j, i) = ta.at(i, j);
  }
  return emplace(std::move(out), {a.index}, [r, c](Graph& g, std::uint32_t self) {
    Node& n = g.node(self);
    Tensor& pg = g.node(n.parents[0]).grad;
    for (std::size_t i = 0; i < r; ++i) {
      for (std::size_t j = 0; j < c; ++j) pg.at(i, j) += n.grad.at(j, i);
    }
  });
}

Var Graph::add_rowvec(Var m, Var v) {
  const Tensor& tm = value(m);
  const Tensor& tv = value(v);
  if (tm.rank() != 2) throw ContractViolation("add_rowvec: matrix required");
  const std::size_t cols = tm.dim(1);
  if (tv.size() != cols) {
    throw ContractViolation("add_rowvec: vector size " + std::to_string(tv.size()) +
                            " != columns " + std::to_string(cols));
  }
  Tensor out = tm;
  const std::size_t rows = tm.dim(0);
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) out.at(i, j) += tv[j];
  }
  return emplace(std::move(out), {m.index, v.index},
                 [rows, cols](Graph& g, std::uint32_t self) {
                   Node& n = g.node(self);
                   Tensor& gm = g.node(n.parents[0]).grad;
                   Tensor& gv = g.node(n.parents[1]).grad;
                   for (std::size_t i = 0; i < rows; ++i) {
                     for (std::size_t j = 0; j < cols; ++j) {
                       const double gij = n.grad.at(i, j);
                       gm.at(i, j) += gij;
                       gv[j] += gij;
                     }
                   }
                 });
}

Var Graph::relu(Var a) {
  Tensor out = value(a);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::max(0.0, out[i]);
  return emplace(std::move(out), {a.index}, [](Graph& g, std::uint32_t self) {
    Node& n = g.node(self);
    Node& p = g.node(n.parents[0]);
    for (std::size_t i = 0; i < n.grad.size(); ++i) {
      if (p.value[i] > 0.0) p.grad[i] += n.grad[i];
    }
  });
}

Var Graph::gelu(Var a) {
  Tensor out = value(a);
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double x = out[i];
    out[i] = 0.5 * x * (1.0 + std::erf(x / kSqrt2));
  }
  return emplace(std::move(out), {a.index}, [](Graph& g, std::uint32_t self) {
    Node& n = g.node(self);
    Node& p = g.node(n.parents[0]);
    for (std::size_t i = 0; i < n.grad.size(); ++i) {
      const double x = p.value[i];
      const double cdf = 0.5 * (1.0 + std::erf(x / kSqrt2));
      const double pdf = kInvSqrt2Pi * std::exp(-0.5 * x * x);
      p.grad[i] += n.grad[i] * (cdf + x * pdf);
    }
  });
}

Var Graph::log(Var a) {
  Tensor out = value(a);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::log(out[i]);
  return emplace(std::move(out), {a.index}, [](Graph& g, std::uint32_t self) {
    Node& n = g.node(self);
    Node& p = g.node(n.parents[0]);
    for (std::size_t i = 0; i < n.grad.size(); ++i) p.grad[i] += n.grad[i] / p.value[i];
  });
}

Var Graph::exp(Var a) {
  Tensor out = value(a);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::exp(out[i]);
  return emplace(std::move(out), {a.index}, [](Graph& g, std::uint32_t self) {
    Node& n = g.node(self);
    Node& p = g.node(n.parents[0]);
    for (std::size_t i = 0; i < n.grad.size(); ++i) p.grad[i] += n.grad[i] * n.value[i];
  });
}

Var Graph::sum(Var a) {
  double s = 0.0;
  for (const double v : value(a).data()) s += v;
  return emplace(Tensor::scalar(s), {a.index}, [](Graph& g, std::uint32_t self) {
    Node& n = g.node(self);
    Tensor& pg = g.node(n.parents[0]).grad;
    const double gd = n.grad.item();
    for (std::size_t i = 0; i < pg.size(); ++i) pg[i] += gd;
  });
}

Var Graph::mean(Var a) {
  const std::size_t count = value(a).size();
  double s = 0.0;
  for (const double v : value(a).data()) s += v;
  return emplace(Tensor::scalar(s / static_cast<double>(count)), {a.index},
                 [count](Graph& g, std::uint32_t self) {
                   Node& n = g.node(self);
                   Tensor& pg = g.node(n.parents[0]).grad;
                   const double gd = n.grad.item() / static_cast<double>(count);
                   for (std::size_t i = 0; i < pg.size(); ++i) pg[i] += gd;
                 });
}

Var Graph::rowwise_dot(Var a, Var b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  check_same_shape(ta, tb, "rowwise_dot");
  if (ta.rank() != 2) throw ContractViolation("rowwise_dot: matrices required");
  const std::size_t rows = ta.dim(0);
  const std::size_t cols = ta.dim(1);
  Tensor out({rows});
  for (std::size_t i = 0; i < rows; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < cols; ++j) s += ta.at(i, j) * tb.at(i, j);
    out.at(i) = s;
  }
  return emplace(std::move(out), {a.index, b.index},
                 [rows, cols](Graph& g, std::uint32_t self) {
                   Node& n = g.node(self);
                   Node& na = g.node(n.parents[0]);
                   Node& nb = g.node(n.parents[1]);
                   for (std::size_t i = 0; i < rows; ++i) {
                     const double gi = n.grad.at(i);
                     if (gi == 0.0) continue;
                     for (std::size_t j = 0; j < cols; ++j) {
                       na.grad.at(i, j) += gi * nb.value.at(i, j);
                       nb.grad.at(i, j) += gi * na.value.at(i, j);
                     }
                   }
                 });
}

Var Graph::softmax_rows(Var a) {
  const Tensor& ta = value(a);
  if (ta.rank() != 2) throw ContractViolation("softmax_rows: matrix required");
  Tensor mask({ta.dim(0), ta.dim(1)});
  mask.fill(1.0);
  return masked_softmax_rows(a, std::move(mask));
}

Var Graph::masked_softmax_rows(Var a, Tensor mask) {
  const Tensor& ta = value(a);
  if (ta.rank() != 2) throw ContractViolation("masked_softmax_rows: matrix required");
  check_same_shape(ta, mask, "masked_softmax_rows");
  const std::size_t rows = ta.dim(0);
  const std::size_t cols = ta.dim(1);
  Tensor out({rows, cols});
  for (std::size_t i = 0; i < rows; ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    bool any = false;
    for (std::size_t j = 0; j < cols; ++j) {
      if (mask.at(i, j) != 0.0) {
        any = true;
        mx = std::max(mx, ta.at(i, j));
      }
    }
    if (!any) continue;  // fully masked row stays zero
    double denom = 0.0;
    for (std::size_t j = 0; j < cols; ++j) {
      if (mask.at(i, j) != 0.0) {
        out.at(i, j) = std::exp(ta.at(i, j) - mx);
        denom += out.at(i, j);
      }
    }
    for (std::size_t j = 0; j < cols; ++j) out.at(i, j) /= denom;
  }
  return emplace(std::move(out), {a.index},
                 [rows, cols](Graph& g, std::uint32_t self) {
                   Node& n = g.node(self);
                   Node& p = g.node(n.parents[0]);
                   for (std::size_t i = 0; i < rows; ++i) {
                     double dot = 0.0;
                     for (std::size_t j = 0; j < cols; ++j) {
                       dot += n.grad.at(i, j) * n.value.at(i, j);
                     }
                     for (std::size_t j = 0; j < cols; ++j) {
                       const double y = n.value.at(i, j);
                       if (y != 0.0) p.grad.at(i, j) += y * (n.grad.at(i, j) - dot);
                     }
                   }
                 });
}

Var Graph::log_softmax_rows(Var a) {
  const Tensor& ta = value(a);
  if (ta.rank() != 2) throw ContractViolation("log_softmax_rows: matrix required");
  const std::size_t rows = ta.dim(0);
  const std::size_t cols = ta.dim(1);
  Tensor out({rows, cols});
  for (std::size_t i = 0; i < rows; ++i) {
    double mx = ta.at(i, 0);
    for (std::size_t j = 1; j < cols; ++j) mx = std::max(mx, ta.at(i, j));
    double denom = 0.0;
    for (std::size_t j = 0; j < cols; ++j) denom += std::exp(ta.at(i, j) - mx);
    const double lse = mx + std::log(denom);
    for (std::size_t j = 0; j < cols; ++j) out.at(i, j) = ta.at(i, j) - lse;
  }
  return emplace(std::move(out), {a.index},
                 [rows, cols](Graph& g, std::uint32_t self) {
                   Node& n = g.node(self);
                   Node& p = g.node(n.parents[0]);
                   for (std::size_t i = 0; i < rows; ++i) {
                     double gsum = 0.0;
                     for (std::size_t j = 0; j < cols; ++j) gsum += n.grad.at(i, j);
                     for (std::size_t j = 0; j < cols; ++j) {
                       p.grad.at(i, j) +=
                           n.grad.at(i, j) - gsum * std::exp(n.value.at(i, j));
                     }
                   }
                 });
}

Var Graph::logsumexp_rows(Var a) {
  const Tensor& ta = value(a);
  if (ta.rank() != 2) throw ContractViolation("logsumexp_rows: matrix required");
  const std::size_t rows = ta.dim(0);
  const std::size_t cols = ta.dim(1);
  Tensor out({rows});
  for (std::size_t i = 0; i < rows; ++i) {
    double mx = ta.at(i, 0);
    for (std::size_t j = 1; j < cols; ++j) mx = std::max(mx, ta.at(i, j));
    double denom = 0.0;
    for (std::size_t j = 0; j < cols; ++j) denom += std::exp(ta.at(i, j) - mx);
    out.at(i) = mx + std::log(denom);
  }
  return emplace(std::move(out), {a.index},
                 [rows, cols](Graph& g, std::uint32_t self) {
                   Node& n = g.node(self);
                   Node& p = g.node(n.parents[0]);
                   for (std::size_t i = 0; i < rows; ++i) {
                     const double gi = n.grad.at(i);
                     if (gi == 0.0) continue;
                     for (std::size_t j = 0; j < cols; ++j) {
                       p.grad.at(i, j) +=
                           gi * std::exp(p.value.at(i, j) - n.value.at(i));
                     }
                   }
                 });
}

Var Graph::slice_rows(Var a, std::size_t start, std::size_t count) {
  const Tensor& ta = value(a);
  if (ta.rank() != 2) throw ContractViolation("slice_rows: matrix required");
  if (start + count > ta.dim(0)) throw ContractViolation("slice_rows: out of range");
  const std::size_t cols = ta.dim(1);
  Tensor out({count, cols});
  for (std::size_t i = 0; i < count; ++i) {
    for (std::size_t j = 0; j < cols; ++j) out.at(i, j) = ta.at(start + i, j);
  }
  return emplace(std::move(out), {a.index},
                 [start, count, cols](Graph& g, std::uint32_t self) {
                   Node& n = g.node(self);
                   Tensor& pg = g.node(n.parents[0]).grad;
                   for (std::size_t i = 0; i < count; ++i) {
                     for (std::size_t j = 0; j < cols; ++j) {
                       pg.at(start + i, j) += n.grad.at(i, j);
                     }
                   }
                 });
}

Var Graph::concat_rows(const std::vector<Var>& parts) {
  if (parts.empty()) throw ContractViolation("concat_rows: no parts");
  const std::size_t cols = value(parts[0]).dim(1);
  std::size_t rows = 0;
  std::vector<std::uint32_t> parents;
  std::vector<std::size_t> part_rows;
  for (const Var p : parts) {
    const Tensor& t = value(p);
    if (t.rank() != 2 || t.dim(1) != cols) {
      throw ContractViolation("concat_rows: column mismatch");
    }
    rows += t.dim(0);
    parents.push_back(p.index);
    part_rows.push_back(t.dim(0));
  }
  Tensor out({rows, cols});
  std::size_t r = 0;
  for (const Var p : parts) {
    const Tensor& t = value(p);
    for (std::size_t i = 0; i < t.dim(0); ++i, ++r) {
      for (std::size_t j = 0; j < cols; ++j) out.at(r, j) = t.at(i, j);
    }
  }
  return emplace(std::move(out), std::move(parents),
                 [part_rows, cols](Graph& g, std::uint32_t self) {
                   Node& n = g.node(self);
                   std::size_t r = 0;
                   for (std::size_t pi = 0; pi < n.parents.size(); ++pi) {
                     Tensor& pg = g.node(n.parents[pi]).grad;
                     for (std::size_t i = 0; i < part_rows[pi]; ++i, ++r) {
                       for (std::size_t j = 0; j < cols; ++j) {
                         pg.at(i, j) += n.grad.at(r, j);
                       }
                     }
                   }
                 });
}

Var Graph::gather_rows(Var m, std::vector<std::size_t> indices) {
  const Tensor& tm = value(m);
  if (tm.rank() != 2) throw ContractViolation("gather_rows: matrix required");
  const std::size_t cols = tm.dim(1);
  Tensor out({indices.size(), cols});
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= tm.dim(0)) throw ContractViolation("gather_rows: index out of range");
    for (std::size_t j = 0; j < cols; ++j) out.at(i, j) = tm.at(indices[i], j);
  }
  return emplace(std::move(out), {m.index},
                 [indices = std::move(indices), cols](Graph& g, std::uint32_t self) {
                   Node& n = g.node(self);
                   Tensor& pg = g.node(n.parents[0]).grad;
                   for (std::size_t i = 0; i < indices.size(); ++i) {
                     for (std::size_t j = 0; j < cols; ++j) {
                       pg.at(indices[i], j) += n.grad.at(i, j);
                     }
                   }
                 });
}

Var Graph::select_entries(Var m, std::vector<std::pair<std::size_t, std::size_t>> idx) {
  const Tensor& tm = value(m);
  if (tm.rank() != 2) throw ContractViolation("select_entries: matrix required");
  Tensor out({idx.size()});
  for (std::size_t i = 0; i < idx.size(); ++i) {
    out.at(i) = tm.at(idx[i].first, idx[i].second);
  }
  return emplace(std::move(out), {m.index},
                 [idx = std::move(idx)](Graph& g, std::uint32_t self) {
                   Node& n = g.node(self);
                   Tensor& pg = g.node(n.parents[0]).grad;
                   for (std::size_t i = 0; i < idx.size(); ++i) {
                     pg.at(idx[i].first, idx[i].second) += n.grad.at(i);
                   }
                 });
}

Var Graph::scale_rows(Var m, Var s) {
  const Tensor& tm = value(m);
  const Tensor& ts = value(s);
  if (tm.rank() != 2 || ts.size() != tm.dim(0)) {
    throw ContractViolation("scale_rows: need matrix and per-row scale vector");
  }
  const std::size_t rows = tm.dim(0);
  const std::size_t cols = tm.dim(1);
  Tensor out = tm;
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) out.at(i, j) *= ts[i];
  }
  return emplace(std::move(out), {m.index, s.index},
                 [rows, cols](Graph& g, std::uint32_t self) {
                   Node& n = g.node(self);
                   Node& nm = g.node(n.parents[0]);
                   Node& ns = g.node(n.parents[1]);
                   for (std::size_t i = 0; i < rows; ++i) {
                     double acc = 0.0;
                     for (std::size_t j = 0; j < cols; ++j) {
                       const double gij = n.grad.at(i, j);
                       nm.grad.at(i, j) += gij * ns.value[i];
                       acc += gij * nm.value.at(i, j);
                     }
                     ns.grad[i] += acc;
                   }
                 });
}

Var Graph::normalize_rows(Var m, double epsilon) {
  const Tensor& tm = value(m);
  if (tm.rank() != 2) throw ContractViolation("normalize_rows: matrix required");
  const std::size_t rows = tm.dim(0);
  const std::size_t cols = tm.dim(1);
  Tensor out = tm;
  std::vector<double> norms(rows);
  for (std::size_t i = 0; i < rows; ++i) {
    double sq = 0.0;
    for (std::size_t j = 0; j < cols; ++j) sq += tm.at(i, j) * tm.at(i, j);
    norms[i] = std::sqrt(sq) + epsilon;
    for (std::size_t j = 0; j < cols; ++j) out.at(i, j) /= norms[i];
  }
  return emplace(std::move(out), {m.index},
                 [rows, cols, norms = std::move(norms)](Graph& g, std::uint32_t self) {
                   Node& n = g.node(self);
                   Node& p = g.node(n.parents[0]);
                   // d(x/r)/dx with r = ||x|| + eps: (I - y x^T / r) / r,
                   // where y is the normalized row.
                   for (std::size_t i = 0; i < rows; ++i) {
                     double dot = 0.0;
                     for (std::size_t j = 0; j < cols; ++j) {
                       dot += n.grad.at(i, j) * n.value.at(i, j);
                     }
                     const double r = norms[i];
                     for (std::size_t j = 0; j < cols; ++j) {
                       p.grad.at(i, j) +=
                           (n.grad.at(i, j) - dot * p.value.at(i, j) / r) / r;
                     }
                   }
                 });
}

Var Graph::reshape(Var a, std::vector<std::size_t> shape) {
  Tensor out = value(a).reshaped(shape);
  return emplace(std::move(out), {a.index}, [](Graph& g, std::uint32_t self) {
    Node& n = g.node(self);
    Tensor& pg = g.node(n.parents[0]).grad;
    for (std::size_t i = 0; i < pg.size(); ++i) pg[i] += n.grad[i];
  });
}

void Graph::backward(Var root) {
  Node& r = nodes_[root.index];
  if (r.value.size() != 1) {
    throw ContractViolation("backward: root must be a single-element tensor");
  }
  for (Node& n : nodes_) n.grad.fill(0.0);
  r.grad[0] = 1.0;
  for (std::size_t i = nodes_.size(); i-- > 0;) {
    if (i > root.index) continue;  // nodes after root cannot influence it
    Node& n = nodes_[i];
    if (n.backprop) n.backprop(*this, static_cast<std::uint32_t>(i));
  }
  for (const auto& [idx, param] : bound_params_) {
    const Tensor& g = nodes_[idx].grad;
    for (std::size_t i = 0; i < g.size(); ++i) param->gradient[i] += g[i];
  }
}

}  // namespace tubeground
