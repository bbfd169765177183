#include "sigpointer/selftest/checks.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "sigpointer/eval/metrics.hpp"
#include "sigpointer/numcore/fft.hpp"
#include "sigpointer/numcore/ops.hpp"
#include "sigpointer/numcore/optim.hpp"
#include "sigpointer/selftest/oracles.hpp"
#include "sigpointer/splicegen/splice.hpp"
#include "sigpointer/train/train.hpp"

namespace sigpointer::selftest {

using num::Tensor;
using TD = Tensor<double>;

namespace {

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(3);
  os << v;
  return os.str();
}

// Scalar probe: sum(out * w) with fixed random weights, so no op sees a
// trivially zero upstream gradient.
TD probe(const TD& out, std::uint64_t seed) {
  const std::size_t rows = out.rank() == 2 ? out.rows() : 1;
  const std::size_t cols = out.size() / rows;
  auto w = oracle::random_leaf(rows, cols, seed, false);
  if (out.rank() != 2) w = TD(out.shape(), {w.data().begin(), w.data().end()});
  return num::sum(num::mul(out, w));
}

struct OpCase {
  std::string name;
  std::vector<TD> inputs;
  oracle::ScalarFn fn;
};

std::vector<OpCase> op_cases(std::uint64_t s) {
  using oracle::random_leaf;
  std::vector<OpCase> cases;
  auto leaf = [&](std::size_t r, std::size_t c) { return random_leaf(r, c, s = num::derive_seed(s, {1})); };
  const auto ps = num::derive_seed(s, {99});

  cases.push_back({"matmul", {leaf(3, 4), leaf(4, 5)}, [ps](auto in) { return probe(num::matmul(in[0], in[1]), ps); }});
  cases.push_back({"add", {leaf(3, 4), leaf(3, 4)}, [ps](auto in) { return probe(num::add(in[0], in[1]), ps); }});
  {
    auto row = leaf(1, 4);
    row = TD({4}, {row.data().begin(), row.data().end()}, true);
    cases.push_back({"add_row", {leaf(3, 4), row}, [ps](auto in) { return probe(num::add_row(in[0], in[1]), ps); }});
  }
  cases.push_back({"scale", {leaf(3, 4)}, [ps](auto in) { return probe(num::scale(in[0], -1.7), ps); }});
  cases.push_back({"mul", {leaf(3, 4), leaf(3, 4)}, [ps](auto in) { return probe(num::mul(in[0], in[1]), ps); }});
  cases.push_back({"relu", {leaf(4, 5)}, [ps](auto in) { return probe(num::relu(in[0]), ps); }});
  cases.push_back({"gelu", {leaf(4, 5)}, [ps](auto in) { return probe(num::gelu(in[0]), ps); }});
  cases.push_back({"softmax rows", {leaf(3, 6)}, [ps](auto in) { return probe(num::softmax(in[0], -1), ps); }});
  cases.push_back({"softmax columns", {leaf(3, 6)}, [ps](auto in) { return probe(num::softmax(in[0], 0), ps); }});
  {
    auto g = leaf(1, 6), b = leaf(1, 6);
    g = TD({6}, {g.data().begin(), g.data().end()}, true);
    b = TD({6}, {b.data().begin(), b.data().end()}, true);
    cases.push_back({"layer_norm", {leaf(4, 6), g, b},
                     [ps](auto in) { return probe(num::layer_norm(in[0], in[1], in[2]), ps); }});
  }
  cases.push_back({"dropout", {leaf(5, 6)}, [ps](auto in) {
                     num::Rng rng(ps);
                     return probe(num::dropout(in[0], 0.3, rng, true), ps);
                   }});
  cases.push_back({"sum", {leaf(3, 4)}, [](auto in) { return num::sum(in[0]); }});
  cases.push_back({"mean", {leaf(3, 4)}, [](auto in) { return num::mean(in[0]); }});
  cases.push_back({"mean_of", {leaf(2, 3), leaf(3, 2)}, [ps](auto in) {
                     std::vector<TD> scalars{probe(in[0], ps), probe(in[1], ps + 1)};
                     return num::mean_of<double>(scalars);
                   }});
  cases.push_back({"slice_rows", {leaf(5, 3)}, [ps](auto in) { return probe(num::slice_rows(in[0], 1, 4), ps); }});
  cases.push_back({"concat_rows", {leaf(2, 3), leaf(3, 3)}, [ps](auto in) {
                     std::vector<TD> parts{in[0], in[1]};
                     return probe(num::concat_rows<double>(parts), ps);
                   }});

  const std::vector<std::size_t> q_off{0, 3, 7}, kv_off{0, 4, 6};
  auto attention = [=](bool causal, double drop) {
    return [=](std::span<const TD> in) {
      num::Rng rng(ps);
      num::AttentionOptions o;
      o.heads = 2;
      o.causal = causal;
      o.dropout = drop;
      o.rng = &rng;
      o.training = drop > 0;
      const auto& kv = causal ? q_off : kv_off;
      return probe(num::multi_head_attention(in[0], in[1], in[2], q_off, kv, o), ps);
    };
  };
  cases.push_back({"attention ragged", {leaf(7, 6), leaf(6, 6), leaf(6, 6)}, attention(false, 0.0)});
  cases.push_back({"attention causal", {leaf(7, 6), leaf(7, 6), leaf(7, 6)}, attention(true, 0.0)});
  cases.push_back({"attention dropout", {leaf(7, 6), leaf(6, 6), leaf(6, 6)}, attention(false, 0.25)});
  cases.push_back({"head_mean_scores", {leaf(3, 6), leaf(5, 6)},
                   [ps](auto in) { return probe(num::head_mean_scores(in[0], in[1], 3), ps); }});
  {
    auto target = random_leaf(3, 5, num::derive_seed(s, {7}), false);
    cases.push_back({"cosine_distance", {leaf(3, 5)},
                     [target](auto in) { return num::cosine_distance(in[0], target); }});
  }
  cases.push_back({"cross_entropy", {leaf(4, 3)}, [](auto in) {
                     const std::vector<int> labels{0, 2, 1, 2};
                     return num::cross_entropy(in[0], labels);
                   }});
  return cases;
}

model::ModelConfig small_config(model::ModelKind kind) {
  model::ModelConfig c;
  c.kind = kind;
  c.encoder_layers = 2;
  c.decoder_layers = 2;
  c.heads = 2;
  c.ff_width = 12;
  c.dropout = 0.2;
  c.latent = 6;
  c.max_frames = 12;
  return c;
}

}  // namespace

std::vector<CheckResult> check_op_gradients(std::size_t instances, std::uint64_t seed, double tolerance) {
  std::vector<CheckResult> out;
  for (std::size_t i = 0; i < instances; ++i) {
    for (auto& c : op_cases(num::derive_seed(seed, {i}))) {
      const auto g = oracle::check_gradients(c.fn, c.inputs);
      out.push_back({"gradient " + c.name + " #" + std::to_string(i), g.max_rel_error < tolerance,
                     "relative error " + fmt(g.max_rel_error) + " over " + std::to_string(g.checked) + " entries"});
    }
  }
  return out;
}

std::vector<CheckResult> check_model_gradients(std::uint64_t seed, double tolerance) {
  std::vector<CheckResult> out;
  const std::vector<std::vector<std::size_t>> labels{{1, 4}, {}};
  const std::vector<std::size_t> lengths{7, 5};

  for (bool prune : {false, true}) {
    auto config = small_config(model::ModelKind::sigpointer);
    config.prune_pointer_tail = prune;
    model::SigPointer<double> m(config, seed);
    std::vector<TD> inputs;
    for (std::size_t b = 0; b < lengths.size(); ++b)
      inputs.push_back(oracle::random_leaf(lengths[b], config.latent, num::derive_seed(seed, {b})));
    const std::size_t n_frames = inputs.size();
    for (auto& p : m.parameters().tensors()) inputs.push_back(p);

    auto fn = [&](std::span<const TD> in) {
      num::Rng rng(seed);
      model::ForwardContext ctx{true, &rng};
      std::vector<TD> frames(in.begin(), in.begin() + n_frames);
      std::vector<std::size_t> steps;
      for (const auto& y : labels) steps.push_back(y.size() + 1);
      auto dists = m.forward_batch(frames, steps, ctx);
      std::vector<TD> losses;
      for (std::size_t b = 0; b < dists.size(); ++b)
        losses.push_back(train::cosine_loss(dists[b], train::make_targets<double>(labels[b], lengths[b])));
      return num::mean_of<double>(losses);
    };
    const auto g = oracle::check_gradients(fn, inputs);
    out.push_back({std::string("gradient pointer model") + (prune ? " (pruned)" : ""), g.max_rel_error < tolerance,
                   "relative error " + fmt(g.max_rel_error) + " over " + std::to_string(g.checked) + " entries"});
  }

  {
    const auto config = small_config(model::ModelKind::encoder_baseline);
    model::EncoderBaseline<double> m(config, seed);
    std::vector<TD> inputs;
    for (std::size_t b = 0; b < lengths.size(); ++b)
      inputs.push_back(oracle::random_leaf(lengths[b], config.latent, num::derive_seed(seed, {b})));
    for (auto& p : m.parameters().tensors()) inputs.push_back(p);
    std::vector<int> classes(lengths[0] + lengths[1], 0);
    for (auto y : labels[0]) classes[y] = 1;
    auto fn = [&](std::span<const TD> in) {
      num::Rng rng(seed);
      std::vector<TD> frames(in.begin(), in.begin() + 2);
      return num::cross_entropy(m.forward_batch(frames, {true, &rng}), classes);
    };
    const auto g = oracle::check_gradients(fn, inputs);
    out.push_back({"gradient baseline model", g.max_rel_error < tolerance,
                   "relative error " + fmt(g.max_rel_error) + " over " + std::to_string(g.checked) + " entries"});
  }
  return out;
}

CheckResult check_pointer_contracts(const model::SigPointer<float>& model, std::size_t inputs, std::uint64_t seed) {
  const auto& config = model.config();
  num::Rng rng(seed);
  std::size_t bad_sum = 0, bad_slots = 0, dependent = 0, prefix = 0, bad_decode = 0, eos_count = 0;
  for (std::size_t i = 0; i < inputs; ++i) {
    const auto n = static_cast<std::size_t>(rng.integer(1, static_cast<std::int64_t>(config.max_frames)));
    std::vector<float> values(n * config.latent);
    for (auto& v : values) v = static_cast<float>(rng.normal());
    const Tensor<float> frames({n, config.latent}, std::move(values));

    num::NoGradGuard no_grad;
    const auto memory = model.encode(frames);
    const std::size_t steps = config.max_decode_steps;
    const auto dists = model.pointer_distributions(memory, steps);
    if (dists.cols() != n + 1) ++bad_slots;
    for (std::size_t s = 0; s < steps; ++s) {
      double total = 0.0;
      for (std::size_t j = 0; j < dists.cols(); ++j) total += dists.at(s, j);
      if (std::abs(total - 1.0) > 1e-5) ++bad_sum;
    }

    // The newest step must see only how many predictions came before it.
    const std::size_t k = static_cast<std::size_t>(rng.integer(0, static_cast<std::int64_t>(steps - 1)));
    std::vector<std::size_t> a(k), b(k);
    for (auto& x : a) x = static_cast<std::size_t>(rng.integer(0, static_cast<std::int64_t>(n)));
    for (auto& x : b) x = static_cast<std::size_t>(rng.integer(0, static_cast<std::int64_t>(n)));
    const auto pa = model.pointer_step(memory, a), pb = model.pointer_step(memory, b);
    if (!std::equal(pa.data().begin(), pa.data().end(), pb.data().begin())) ++dependent;
    for (std::size_t j = 0; j < pa.size(); ++j)
      if (std::abs(pa.data()[j] - dists.at(k, j)) > 1e-5f) {
        ++prefix;
        break;
      }

    const auto r = model.infer(frames);
    eos_count += r.reached_eos;
    const bool ok = r.raw_slots.size() <= steps && (r.reached_eos || r.raw_slots.size() == steps) &&
                    std::is_sorted(r.labels.begin(), r.labels.end()) &&
                    std::adjacent_find(r.labels.begin(), r.labels.end()) == r.labels.end() &&
                    std::all_of(r.labels.begin(), r.labels.end(), [n](std::size_t f) { return f < n; });
    if (!ok) ++bad_decode;
  }
  const bool passed = bad_sum + bad_slots + dependent + prefix + bad_decode == 0;
  std::ostringstream d;
  d << inputs << " inputs; " << bad_sum << " bad sums, " << bad_slots << " bad widths, " << dependent
    << " value-dependent steps, " << prefix << " step/prefix mismatches, " << bad_decode << " bad decodes, "
    << eos_count << " halted on eos";
  return {"pointer contracts", passed, d.str()};
}

CheckResult check_metric_oracles(std::size_t random_pairs, std::uint64_t seed) {
  std::size_t mismatches = 0, compared = 0, order = 0;
  auto compare = [&](std::uint32_t p, std::uint32_t t) {
    const auto ps = oracle::from_mask(p), ts = oracle::from_mask(t);
    for (std::size_t f = 1; f <= 4; ++f) {
      const auto pb = eval::bin_indices(ps, f), tb = eval::bin_indices(ts, f);
      const auto mp = oracle::bin_mask(p, f), mt = oracle::bin_mask(t, f);
      ++compared;
      if (pb != oracle::from_mask(mp) || tb != oracle::from_mask(mt) ||
          std::abs(eval::jaccard(pb, tb) - oracle::jaccard_mask(mp, mt)) > 1e-12 ||
          std::abs(eval::recall(pb, tb) - oracle::recall_mask(mp, mt)) > 1e-12)
        ++mismatches;
      if (mt != 0 && eval::jaccard(pb, tb) > eval::recall(pb, tb) + 1e-12) ++order;
    }
  };
  for (std::uint32_t p = 0; p < 64; ++p)
    for (std::uint32_t t = 0; t < 64; ++t) compare(p, t);
  num::Rng rng(seed);
  for (std::size_t i = 0; i < random_pairs; ++i)
    compare(static_cast<std::uint32_t>(rng.integer(0, 4095)), static_cast<std::uint32_t>(rng.integer(0, 4095)));
  const bool empty_ok = eval::jaccard({}, {}) == 1.0;
  std::ostringstream d;
  d << compared << " comparisons, " << mismatches << " mismatches, " << order << " cases with J > R"
    << (empty_ok ? "" : ", J(empty, empty) != 1");
  return {"metric oracles", mismatches == 0 && order == 0 && empty_ok, d.str()};
}

CheckResult check_fft_oracles(std::uint64_t seed) {
  num::Rng rng(seed);
  double worst = 0.0;
  for (std::size_t n : {8u, 15u, 64u, 400u}) {
    std::vector<double> x(n);
    for (auto& v : x) v = rng.uniform(-1.0, 1.0);
    std::vector<std::complex<double>> fast;
    num::RealFft(n).forward(x, fast);
    const auto slow = oracle::direct_dft(x);
    for (std::size_t k = 0; k < fast.size(); ++k) worst = std::max(worst, std::abs(fast[k] - slow[k]));

    const auto dct_slow = oracle::direct_dct2(x);
    num::Dct dct(n);
    std::vector<double> dct_fast(n), back(n);
    dct.forward(x, dct_fast);
    dct.inverse(dct_fast, back);
    for (std::size_t k = 0; k < n; ++k) {
      worst = std::max(worst, std::abs(dct_fast[k] - dct_slow[k]));
      worst = std::max(worst, std::abs(back[k] - x[k]));
    }
  }
  return {"fft and dct oracles", worst < 1e-9, "max abs error " + fmt(worst)};
}

CheckResult check_adam_oracle() {
  num::AdamHyper hyper;
  hyper.lr = 1e-2;
  TD p({3}, {0.5, -1.0, 2.0}, true);
  const std::vector<double> grads{0.3, -2.0, 1e-6};
  num::Adam<double> adam({p}, hyper);
  auto loss = num::sum(num::mul(p, TD({3}, grads)));
  loss.backward();
  adam.step();
  const std::vector<double> start{0.5, -1.0, 2.0};
  double worst = 0.0;
  for (std::size_t i = 0; i < 3; ++i) {
    const double expect = start[i] + oracle::adam_first_step(grads[i], hyper.lr, hyper.beta1, hyper.beta2, hyper.eps);
    worst = std::max(worst, std::abs(p.data()[i] - expect));
  }
  return {"adam first step", worst < 1e-12, "max abs error " + fmt(worst)};
}

CheckResult check_label_oracle(std::size_t samples, std::uint64_t seed) {
  num::Rng rng(seed);
  std::size_t mismatches = 0;
  for (std::size_t i = 0; i < samples; ++i) {
    const auto segments = static_cast<std::size_t>(rng.integer(1, 6));
    std::vector<double> seconds(segments);
    std::vector<std::size_t> junctions;
    std::size_t at = 0;
    for (auto& s : seconds) {
      const auto len = static_cast<std::size_t>(rng.integer(8000, 80000));
      s = len / 16000.0;
      at += len;
      junctions.push_back(at);
    }
    junctions.pop_back();
    if (splicegen::labels_from_junctions(junctions, 8000) != oracle::boundary_time_labels(seconds)) ++mismatches;
  }
  return {"splice label oracle", mismatches == 0, std::to_string(mismatches) + " of " + std::to_string(samples)};
}

CheckResult check_positional_oracle() {
  double worst = 0.0;
  for (std::size_t dim : {6u, 7u, 279u})
    for (std::size_t pos : {0u, 1u, 5u, 90u}) {
      const auto a = model::positional_encoding<double>(pos, dim);
      const auto b = oracle::sinusoid_row(pos, dim);
      for (std::size_t i = 0; i < dim; ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
    }
  return {"positional encoding oracle", worst < 1e-12, "max abs error " + fmt(worst)};
}

CheckResult check_parameter_counts() {
  const auto star = model::ModelConfig::sigpointer_star();
  const auto base = model::ModelConfig::transformer_encoder_baseline();
  model::SigPointer<float> sp(star, 1);
  model::EncoderBaseline<float> eb(base, 1);
  const std::size_t ns = sp.parameters().scalar_count(), nb = eb.parameters().scalar_count();
  const bool ok = ns == model::count_parameters(star) && nb == model::count_parameters(base) &&
                  std::abs(ns / 3.40e6 - 1.0) <= 0.10 && std::abs(nb / 17.51e6 - 1.0) <= 0.10;
  return {"parameter counts", ok, "pointer " + std::to_string(ns) + ", baseline " + std::to_string(nb)};
}

std::vector<CheckResult> run_all(const SelftestOptions& options) {
  std::vector<CheckResult> out;
  auto append = [&](std::vector<CheckResult> more) { out.insert(out.end(), more.begin(), more.end()); };
  append(check_op_gradients(options.gradient_instances, options.seed));
  append(check_model_gradients(options.seed));
  out.push_back(check_metric_oracles(options.metric_pairs, options.seed));
  out.push_back(check_fft_oracles(options.seed));
  out.push_back(check_adam_oracle());
  out.push_back(check_label_oracle(500, options.seed));
  out.push_back(check_positional_oracle());
  out.push_back(check_parameter_counts());
  model::SigPointer<float> pointer(model::ModelConfig::sigpointer_star(), options.seed);
  out.push_back(check_pointer_contracts(pointer, options.pointer_inputs, options.seed));
  return out;
}

}  // namespace sigpointer::selftest
