#include "qapg/gradsuite.hpp"

#include <algorithm>

#include "qapg/answersel.hpp"
#include "qapg/errors.hpp"
#include "qapg/lstm.hpp"
#include "qapg/qgmodel.hpp"

namespace qapg::diff {

namespace {

constexpr std::size_t kCompositeEntries = 12;

// Fixed random weighting so the checked scalar depends on every output
// entry non-trivially.
Var probe(Graph<double>& g, Var v, std::uint64_t salt = 0) {
  const auto s = g.shape(v);
  Rng rng(0x9e3779b97f4a7c15ULL ^ (s.rows * 131 + s.cols) ^ salt);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  Tensor<double> w(s);
  for (auto& x : w.values()) x = dist(rng);
  return g.sum(g.mul(v, g.constant(std::move(w))));
}

GradCase unary(std::string name, std::vector<Shape> shapes, std::function<Var(Graph<double>&, std::span<const Var>)> f) {
  return {name, [shapes, f](std::uint64_t seed) {
            return grad_check([&](Graph<double>& g, std::span<const Var> in) { return probe(g, f(g, in)); }, shapes,
                              seed);
          }};
}

model::SourceInput random_source(Rng& rng, std::size_t n, const model::FeatureSpec& spec, std::size_t vocab) {
  model::SourceInput s;
  for (std::size_t t = 0; t < n; ++t) {
    s.words.push_back(static_cast<std::int32_t>(rng() % vocab));
    std::vector<std::uint32_t> cols;
    std::uint32_t offset = 0;
    for (auto w : {spec.pos_width, spec.ner_width, spec.dep_width}) {
      if (w == 0) continue;
      cols.push_back(offset + static_cast<std::uint32_t>(rng() % w));
      offset += static_cast<std::uint32_t>(w);
    }
    if (spec.bio) cols.push_back(offset + static_cast<std::uint32_t>(rng() % 3));
    s.active.push_back(std::move(cols));
  }
  return s;
}

model::FeatureSpec tiny_spec(bool bio) {
  model::FeatureSpec spec;
  spec.word_dim = 3;
  spec.pos_width = 2;
  spec.ner_width = 3;
  spec.dep_width = 2;
  spec.bio = bio;
  return spec;
}

model::QgDims tiny_qg() {
  model::QgDims d;
  d.input = tiny_spec(true);
  d.vocab_size = 9;
  d.hidden = 3;
  d.encoder_layers = 2;
  d.decoder_layers = 2;
  return d;
}

GradCase qg_case(std::string name, std::vector<Shape> shapes,
                 std::function<Var(Graph<double>&, const model::QgModel<double>&, const model::SourceInput&,
                                   const std::vector<std::int32_t>&, std::span<const Var>)>
                     f) {
  return {name, [shapes, f](std::uint64_t seed) {
            Rng rng(seed * 7919 + 17);
            model::QgModel<double> m(tiny_qg());
            m.params().init_uniform(rng, -0.5, 0.5);
            const auto src = random_source(rng, 4, m.dims().input, m.dims().vocab_size);
            std::vector<std::int32_t> question;
            for (int i = 0; i < 3; ++i) question.push_back(static_cast<std::int32_t>(4 + rng() % 5));
            return grad_check([&](Graph<double>& g, std::span<const Var> in) { return f(g, m, src, question, in); },
                              shapes, seed, &m.params(), 1e-5, kCompositeEntries);
          }};
}

answer::PointerDims tiny_pointer() {
  answer::PointerDims d;
  d.input = tiny_spec(false);
  d.vocab_size = 8;
  d.hidden = 3;
  d.decoder_hidden = 4;
  d.attention = 3;
  return d;
}

GradCase pointer_case(std::string name, std::vector<Shape> shapes,
                      std::function<Var(Graph<double>&, const answer::PointerNet<double>&, const model::SourceInput&,
                                        std::span<const Var>)>
                          f) {
  return {name, [shapes, f](std::uint64_t seed) {
            Rng rng(seed * 104729 + 3);
            answer::PointerNet<double> net(tiny_pointer());
            net.params().init_uniform(rng, -0.5, 0.5);
            const auto src = random_source(rng, 5, net.dims().input, net.dims().vocab_size);
            return grad_check([&](Graph<double>& g, std::span<const Var> in) { return f(g, net, src, in); }, shapes,
                              seed, &net.params(), 1e-5, kCompositeEntries);
          }};
}

GradCase ne_case(std::string name, std::size_t mlp_hidden) {
  return {name, [mlp_hidden](std::uint64_t seed) {
            Rng rng(seed * 15485863 + 11);
            answer::NeDims d;
            d.input = tiny_spec(false);
            d.vocab_size = 8;
            d.hidden = 3;
            d.layers = 2;
            d.mlp_hidden = mlp_hidden;
            answer::NeSelector<double> ne(d);
            ne.params().init_uniform(rng, -0.5, 0.5);
            const auto src = random_source(rng, 6, d.input, d.vocab_size);
            const std::vector<corpus::AnswerSpan> cands = {{1, 2}, {3, 3}, {5, 6}};
            const auto gold = static_cast<std::size_t>(rng() % cands.size());
            return grad_check([&](Graph<double>& g, std::span<const Var>) { return ne.loss(g, src, cands, gold); }, {},
                              seed, &ne.params(), 1e-5, kCompositeEntries);
          }};
}

std::vector<GradCase> build_cases() {
  std::vector<GradCase> c;
  using In = std::span<const Var>;
  c.push_back(unary("matmul", {{3, 4}, {4, 2}}, [](Graph<double>& g, In x) { return g.matmul(x[0], x[1]); }));
  c.push_back(unary("add", {{3, 2}, {3, 2}}, [](Graph<double>& g, In x) { return g.add(x[0], x[1]); }));
  c.push_back(unary("sub", {{3, 2}, {3, 2}}, [](Graph<double>& g, In x) { return g.sub(x[0], x[1]); }));
  c.push_back(unary("mul", {{3, 2}, {3, 2}}, [](Graph<double>& g, In x) { return g.mul(x[0], x[1]); }));
  c.push_back(unary("scale", {{3, 2}}, [](Graph<double>& g, In x) { return g.scale(x[0], 1.7); }));
  c.push_back(unary("add_col", {{3, 4}, {3, 1}}, [](Graph<double>& g, In x) { return g.add_col(x[0], x[1]); }));
  c.push_back(unary("tanh", {{4, 3}}, [](Graph<double>& g, In x) { return g.tanh(x[0]); }));
  c.push_back(unary("sigmoid", {{4, 3}}, [](Graph<double>& g, In x) { return g.sigmoid(x[0]); }));
  c.push_back(unary("concat", {{2, 3}, {4, 3}}, [](Graph<double>& g, In x) { return g.concat({x[0], x[1]}); }));
  c.push_back(unary("hstack", {{3, 2}, {3, 1}}, [](Graph<double>& g, In x) { return g.hstack(x); }));
  c.push_back(unary("slice_rows", {{5, 2}}, [](Graph<double>& g, In x) { return g.slice_rows(x[0], 1, 3); }));
  c.push_back(unary("column", {{3, 4}}, [](Graph<double>& g, In x) { return g.column(x[0], 2); }));
  c.push_back(unary("transpose", {{3, 2}}, [](Graph<double>& g, In x) { return g.transpose(x[0]); }));
  c.push_back(unary("softmax_axis0", {{4, 3}}, [](Graph<double>& g, In x) { return g.softmax(x[0], 0); }));
  c.push_back(unary("softmax_axis1", {{3, 4}}, [](Graph<double>& g, In x) { return g.softmax(x[0], 1); }));
  c.push_back(unary("log_softmax", {{5, 2}}, [](Graph<double>& g, In x) { return g.log_softmax(x[0]); }));
  c.push_back(unary("mask_rows", {{4, 3}}, [](Graph<double>& g, In x) {
    const std::size_t rows[] = {1};
    return g.mask_rows(x[0], rows, -3.0);
  }));
  c.push_back(unary("sum", {{3, 3}}, [](Graph<double>& g, In x) { return g.sum(g.mul(x[0], x[0])); }));
  c.push_back(unary("mean_cols", {{3, 4}}, [](Graph<double>& g, In x) { return g.mean_cols(x[0]); }));
  c.push_back(unary("dropout", {{4, 4}}, [](Graph<double>& g, In x) {
    Rng rng(99);  // same mask on every evaluation
    return g.dropout(x[0], 0.3, true, rng);
  }));
  c.push_back({"nll_loss_pad", [](std::uint64_t seed) {
                 return grad_check(
                     [](Graph<double>& g, In x) {
                       const std::int32_t targets[] = {2, 0, 4};  // 0 is PAD
                       return g.nll_loss(g.log_softmax(x[0]), targets, 0);
                     },
                     {{5, 3}}, seed);
               }});
  c.push_back({"gather", [](std::uint64_t seed) {
                 ParamSet<double> params;
                 auto& table = params.add("embed", 6, 3, true);
                 Rng rng(seed + 5);
                 params.init_uniform(rng, -1.0, 1.0);
                 return grad_check(
                     [&](Graph<double>& g, In) {
                       const std::int32_t ids[] = {1, 4, 1, 0};
                       return probe(g, g.gather(table, ids));
                     },
                     {}, seed, &params);
               }});
  c.push_back({"lstm_step", [](std::uint64_t seed) {
                 ParamSet<double> params;
                 const auto cell = LstmCell<double>::create(params, "cell", 3, 4);
                 Rng rng(seed + 9);
                 params.init_uniform(rng, -0.5, 0.5);
                 return grad_check(
                     [&](Graph<double>& g, In x) {
                       const auto s = lstm_step(g, x[0], {x[1], x[2]}, cell);
                       return g.add(probe(g, s.h, 1), probe(g, s.c, 2));
                     },
                     {{3, 1}, {4, 1}, {4, 1}}, seed, &params);
               }});
  c.push_back(unary("softmax_nll", {{6, 1}}, [](Graph<double>& g, In x) {
    const std::int32_t t[] = {3};
    return g.nll_loss(g.log_softmax(x[0]), t, -1);
  }));

  c.push_back(qg_case("qg.encoder", {}, [](Graph<double>& g, const model::QgModel<double>& m,
                                             const model::SourceInput& s, const auto&, In) {
    const auto enc = m.encode(g, s);
    Var total = probe(g, enc.states);
    for (std::size_t l = 0; l < enc.bridge.size(); ++l) total = g.add(total, probe(g, enc.bridge[l].h, l + 1));
    return total;
  }));
  c.push_back(qg_case("qg.attention", {{3, 1}}, [](Graph<double>& g, const model::QgModel<double>& m,
                                                    const model::SourceInput& s, const auto&, In x) {
    const auto enc = m.encode(g, s);
    const auto att = m.attend(g, x[0], enc);
    return g.add(probe(g, att.context), probe(g, att.alpha, 7));
  }));
  c.push_back(qg_case("qg.decode_step", {}, [](Graph<double>& g, const model::QgModel<double>& m,
                                               const model::SourceInput& s, const auto& q, In) {
    const auto enc = m.encode(g, s);
    auto state = enc.bridge;
    m.decode_step(g, corpus::Vocabulary::kBos, state, enc);
    const Var logp = m.decode_step(g, q[0], state, enc);
    const std::int32_t target[] = {q[1]};
    return g.nll_loss(logp, target, corpus::Vocabulary::kPad);
  }));
  c.push_back(qg_case("qg.loss", {}, [](Graph<double>& g, const model::QgModel<double>& m,
                                        const model::SourceInput& s, const auto& q, In) { return m.loss(g, s, q); }));

  c.push_back(pointer_case("pointer.scores", {{4, 1}}, [](Graph<double>& g, const answer::PointerNet<double>& net,
                                                          const model::SourceInput& s, In x) {
    return probe(g, net.scores(g, net.encode(g, s), x[0]));
  }));
  c.push_back(pointer_case("pointer.boundary_loss", {}, [](Graph<double>& g, const answer::PointerNet<double>& net,
                                                           const model::SourceInput& s, In) {
    return net.loss(g, s, answer::pointer_targets({2, 4}, s.size(), answer::PointerMode::Boundary));
  }));
  c.push_back(pointer_case("pointer.sequence_loss", {}, [](Graph<double>& g, const answer::PointerNet<double>& net,
                                                           const model::SourceInput& s, In) {
    return net.loss(g, s, answer::pointer_targets({2, 4}, s.size(), answer::PointerMode::Sequence));
  }));
  c.push_back(ne_case("ne.loss", 0));
  c.push_back(ne_case("ne.loss_mlp", 4));
  return c;
}

}  // namespace

const std::vector<GradCase>& gradcheck_cases() {
  static const std::vector<GradCase> cases = build_cases();
  return cases;
}

GradCheckReport run_grad_check(const std::string& name, std::uint64_t seed) {
  for (const auto& c : gradcheck_cases()) {
    if (c.name == name) return c.run(seed);
  }
  throw ContractViolation("no gradient registered for op '" + name + "'");
}

std::vector<GradSuiteRow> run_grad_suite(std::size_t num_seeds, double tolerance) {
  std::vector<GradSuiteRow> rows;
  for (const auto& c : gradcheck_cases()) {
    GradSuiteRow row;
    row.name = c.name;
    for (std::size_t seed = 1; seed <= num_seeds; ++seed) {
      const auto r = c.run(seed);
      row.max_rel_error = std::max(row.max_rel_error, r.max_rel_error);
      row.entries += r.entries;
    }
    row.passed = row.max_rel_error < tolerance;
    rows.push_back(row);
  }
  return rows;
}

}  // namespace qapg::diff
