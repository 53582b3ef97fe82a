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

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <thread>
#include <vector>

#include "cmstr/checkpoint.hpp"
#include "cmstr/data.hpp"
#include "cmstr/decoding.hpp"
#include "cmstr/model.hpp"

namespace cmstr {

// Warmup then cosine. Linear ramp 0 -> peak over the warmup steps, cosine
// peak -> 0 at total. at(warmup) is exactly peak, at(0) and at(total) are
// exactly 0; past total the rate clamps to 0 with a one-time warning.
struct LrSchedule {
    double peak_enc = 0;
    double peak_scratch = 0;
    std::int64_t warmup = 1;
    std::int64_t total = 1;
    mutable bool warned = false;

    static LrSchedule make(const Config& cfg, std::int64_t total_steps) {
        if (total_steps < 1) throw ContractError("schedule needs at least one step");
        LrSchedule s;
        s.peak_enc = cfg.base_lr * double(cfg.batch) / 512.0;
        s.peak_scratch = s.peak_enc * cfg.scratch_mult;
        s.total = total_steps;
        s.warmup = std::max<std::int64_t>(
            1, std::int64_t(std::llround(cfg.warmup_frac * double(total_steps))));
        return s;
    }

    double at(std::int64_t step, bool scratch) const {
        if (step < 0) throw ContractError("schedule step must be >= 0");
        const double peak = scratch ? peak_scratch : peak_enc;
        if (step > total) {
            if (!warned) {
                warned = true;
                std::cerr << "warning: lr schedule queried past total_steps; clamping to 0\n";
            }
            return 0.0;
        }
        if (step <= warmup) return peak * double(step) / double(warmup);
        if (step >= total) return 0.0;
        const double progress = double(step - warmup) / double(total - warmup);
        return peak * 0.5 * (1.0 + std::cos(3.14159265358979323846 * progress));
    }
};

// AdamW over the two parameter groups. Decay is decoupled: weights shrink by
// lr*wd*w directly, never through the moment estimates, and decay-exempt
// tensors (norm gains, biases, position queries) skip it. A non-finite
// gradient aborts the whole step before any weight moves.
template <typename Scalar>
class AdamWT {
public:
    AdamWT(const typename ModelT<Scalar>::Groups& groups, const Config& cfg)
        : beta1_(cfg.beta1), beta2_(cfg.beta2), eps_(cfg.adam_eps),
          weight_decay_(cfg.weight_decay), groups_(groups) {
        auto init = [](const std::vector<TensorPtr<Scalar>>& ps,
                       std::vector<Moments>& out) {
            for (const auto& p : ps) {
                out.push_back({Mat<Scalar>::Zero(p->value.rows(), p->value.cols()),
                               Mat<Scalar>::Zero(p->value.rows(), p->value.cols())});
            }
        };
        init(groups_.encoder, enc_);
        init(groups_.scratch, scratch_);
    }

    void step(double lr_enc, double lr_scratch) {
        for (const auto& p : groups_.encoder) check_finite(p);
        for (const auto& p : groups_.scratch) check_finite(p);
        ++t_;
        const double bc1 = 1.0 - std::pow(beta1_, double(t_));
        const double bc2 = 1.0 - std::pow(beta2_, double(t_));
        apply(groups_.encoder, groups_.encoder_decay_exempt, enc_, lr_enc, bc1, bc2);
        apply(groups_.scratch, groups_.scratch_decay_exempt, scratch_, lr_scratch, bc1,
              bc2);
    }

    std::int64_t steps_applied() const { return t_; }
    void set_steps_applied(std::int64_t t) { t_ = t; }

    void append_state(CheckpointData& data) const {
        auto emit = [&](const std::vector<TensorPtr<Scalar>>& ps,
                        const std::vector<Moments>& ms) {
            for (std::size_t i = 0; i < ps.size(); ++i) {
                data.append("opt.m." + ps[i]->name, ms[i].m.template cast<float>(), false);
                data.append("opt.v." + ps[i]->name, ms[i].v.template cast<float>(), false);
            }
        };
        emit(groups_.encoder, enc_);
        emit(groups_.scratch, scratch_);
    }

    void restore_state(const CheckpointData& data) {
        auto take = [&](const std::vector<TensorPtr<Scalar>>& ps,
                        std::vector<Moments>& ms) {
            for (std::size_t i = 0; i < ps.size(); ++i) {
                const auto* em = data.find("opt.m." + ps[i]->name);
                const auto* ev = data.find("opt.v." + ps[i]->name);
                if (!em || !ev) {
                    throw CheckpointError("checkpoint lacks optimizer state for " +
                                          ps[i]->name);
                }
                ms[i].m = data.tensor(*em).template cast<Scalar>();
                ms[i].v = data.tensor(*ev).template cast<Scalar>();
            }
        };
        take(groups_.encoder, enc_);
        take(groups_.scratch, scratch_);
        t_ = std::int64_t(data.step);
    }

private:
    struct Moments {
        Mat<Scalar> m, v;
    };

    void check_finite(const TensorPtr<Scalar>& p) const {
        if (p->grad.size() != 0 && !p->grad.allFinite()) {
            throw ContractError("non-finite gradient in tensor " + p->name +
                                "; aborting optimizer step");
        }
    }

    void apply(const std::vector<TensorPtr<Scalar>>& ps, const std::vector<bool>& exempt,
               std::vector<Moments>& ms, double lr, double bc1, double bc2) {
        for (std::size_t i = 0; i < ps.size(); ++i) {
            auto& p = *ps[i];
            auto& mo = ms[i];
            const Scalar b1 = Scalar(beta1_), b2 = Scalar(beta2_);
            if (p.grad.size() == 0) {
                mo.m *= b1;
                mo.v *= b2;
            } else {
                mo.m = b1 * mo.m + (Scalar(1) - b1) * p.grad;
                mo.v = b2 * mo.v + (Scalar(1) - b2) * p.grad.cwiseProduct(p.grad);
            }
            if (!exempt[i] && weight_decay_ > 0) {
                p.value -= Scalar(lr * weight_decay_) * p.value;
            }
            const Scalar s1 = Scalar(1.0 / bc1), s2 = Scalar(1.0 / bc2);
            p.value.array() -= Scalar(lr) * (mo.m.array() * s1) /
                               ((mo.v.array() * s2).sqrt() + Scalar(eps_));
        }
    }

    double beta1_, beta2_, eps_, weight_decay_;
    typename ModelT<Scalar>::Groups groups_;
    std::vector<Moments> enc_, scratch_;
    std::int64_t t_ = 0;
};

template <typename Scalar>
void save_train_checkpoint(const std::string& path, const ModelT<Scalar>& model,
                           const AdamWT<Scalar>* opt, std::uint64_t step,
                           std::uint64_t total_steps) {
    CheckpointData data;
    data.config_text = model.cfg().to_text();
    data.seed = model.cfg().seed;
    data.step = step;
    data.total_steps = total_steps;
    append_store(data, model.store());
    if (opt) opt->append_state(data);
    write_checkpoint(path, data);
}

inline Config config_from_checkpoint(const CheckpointData& data) {
    Config cfg;
    cfg.apply_text(data.config_text, "checkpoint");
    cfg.validate();
    return cfg;
}

struct EvalCounts {
    int n = 0;
    int visual = 0;
    int cross = 0;
    int final = 0;
};

struct EvalReport {
    double visual = 0;
    double cross = 0;
    double final = 0;
    std::map<std::string, EvalCounts> per_tag;
    std::vector<Prediction> samples;  // aligned with the evaluated inputs
};

// Word accuracy of all three outputs over the dataset, with per-tag splits.
// Inference is pure, so samples may shard across threads; results are
// identical at any thread count.
template <typename Scalar>
EvalReport evaluate(const ModelT<Scalar>& model, const std::vector<Sample>& data,
                    const DecodePolicy& policy, int limit = 0, int threads = 1) {
    if (data.empty()) throw ContractError("evaluate: empty dataset");
    const int n = limit > 0 ? std::min<int>(limit, int(data.size())) : int(data.size());
    const Config& cfg = model.cfg();

    EvalReport report;
    report.samples.resize(std::size_t(n));
    auto run = [&](int from, int stride) {
        for (int i = from; i < n; i += stride) {
            Image img = resize_nearest(data[std::size_t(i)].image, cfg.image_h, cfg.image_w);
            report.samples[std::size_t(i)] = predict(model, img, policy);
        }
    };
    threads = std::max(1, threads);
    if (threads == 1) {
        run(0, 1);
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < threads; ++t) pool.emplace_back(run, t, threads);
        for (auto& t : pool) t.join();
    }

    const std::string eval_cs = cfg.resolved_eval_charset();
    auto match = [&](const std::string& a, const std::string& b) {
        return eval_filter(a, eval_cs) == eval_filter(b, eval_cs);
    };
    int vis = 0, cross = 0, fin = 0;
    for (int i = 0; i < n; ++i) {
        const auto& s = data[std::size_t(i)];
        const auto& p = report.samples[std::size_t(i)];
        const bool mv = match(p.visual, s.label);
        const bool mc = match(p.cross, s.label);
        const bool mf = match(p.final, s.label);
        vis += mv;
        cross += mc;
        fin += mf;
        for (const auto& tag : s.tags) {
            auto& c = report.per_tag[tag];
            ++c.n;
            c.visual += mv;
            c.cross += mc;
            c.final += mf;
        }
    }
    report.visual = double(vis) / n;
    report.cross = double(cross) / n;
    report.final = double(fin) / n;
    return report;
}

struct TrainOptions {
    std::string out_dir;
    const std::vector<Sample>* eval_data = nullptr;  // nullptr: eval on train data
    DecodePolicy eval_policy;
    double stop_at_acc = -1.0;       // early stop once eval final accuracy reaches this
    std::int64_t stop_after_steps = -1;  // interrupt hook for resume testing
    std::string resume;              // checkpoint path, empty for a fresh run
    int eval_threads = 1;
};

struct TrainResult {
    std::int64_t steps = 0;
    std::int64_t total_steps = 0;
    double last_loss = 0;
    double best_acc = -1;
    std::string final_checkpoint;
    std::string best_checkpoint;
};

// The training loop. Per step: draw the shared mask set, pick batch samples
// by counter hashing (stateless, so resume replays the identical stream),
// run accum_steps micro-batches on fresh tapes into accumulated gradients,
// then one AdamW step at the scheduled rates. Everything downstream of the
// (seed, step, slot) coordinates is deterministic.
template <typename Scalar>
TrainResult train_loop(ModelT<Scalar>& model, const std::vector<Sample>& data,
                       const TrainOptions& opts) {
    if (data.empty()) throw DataError("train: dataset is empty");
    if (opts.out_dir.empty()) throw ContractError("train: out_dir required");
    const Config& cfg = model.cfg();
    const int n = int(data.size());
    const std::int64_t steps_per_epoch = (n + cfg.batch - 1) / cfg.batch;
    const std::int64_t total = std::max<std::int64_t>(1, cfg.epochs * steps_per_epoch);
    const int micro = cfg.batch / cfg.accum_steps;

    auto groups = model.parameter_groups();
    AdamWT<Scalar> opt(groups, cfg);
    LrSchedule sched = LrSchedule::make(cfg, total);

    std::int64_t start = 0;
    if (!opts.resume.empty()) {
        CheckpointData ck = read_checkpoint(opts.resume);
        if (ck.total_steps != std::uint64_t(total)) {
            throw CheckpointError("resume: schedule length mismatch (checkpoint " +
                                  std::to_string(ck.total_steps) + ", run " +
                                  std::to_string(total) + ")");
        }
        restore_store(ck, model.store());
        opt.restore_state(ck);
        start = std::int64_t(ck.step);
    }

    std::filesystem::create_directories(opts.out_dir);
    std::ofstream log(opts.out_dir + "/metrics.tsv",
                      opts.resume.empty() ? std::ios::trunc : std::ios::app);
    if (!log) throw DataError("cannot open metrics log in " + opts.out_dir);

    TrainResult result;
    result.total_steps = total;
    result.steps = start;

    std::vector<const Image*> images(static_cast<std::size_t>(micro));
    std::vector<Image> holders(static_cast<std::size_t>(micro));
    std::vector<std::string> labels(static_cast<std::size_t>(micro));
    std::vector<std::uint64_t> slots(static_cast<std::size_t>(micro));

    for (std::int64_t s = start; s < total; ++s) {
        std::vector<std::vector<MatF>> mask_sets;
        if (cfg.per_sample_masks) {
            for (int slot = 0; slot < cfg.batch; ++slot) {
                Rng mrng = Rng::derive(cfg.seed, 0x6d736b, std::uint64_t(s),
                                       std::uint64_t(slot));
                mask_sets.push_back(sample_training_masks(cfg.mask_k, model.vocab().seq_len(),
                                                          mrng, cfg.mask_pairing));
            }
        } else {
            Rng mrng = Rng::derive(cfg.seed, 0x6d736b, std::uint64_t(s));
            mask_sets.push_back(sample_training_masks(cfg.mask_k, model.vocab().seq_len(),
                                                      mrng, cfg.mask_pairing));
        }

        model.store().zero_grads();
        double step_loss = 0;
        for (int chunk = 0; chunk < cfg.accum_steps; ++chunk) {
            std::vector<std::vector<MatF>> chunk_masks;
            for (int i = 0; i < micro; ++i) {
                const int slot = chunk * micro + i;
                const std::uint64_t pick =
                    Rng::hash(cfg.seed, 0x64617461, std::uint64_t(s), std::uint64_t(slot));
                const Sample& sample = data[std::size_t(pick % std::uint64_t(n))];
                Image img = sample.image;
                if (cfg.augment) {
                    Rng arng = Rng::derive(cfg.seed, 0x617567, std::uint64_t(s),
                                           std::uint64_t(slot));
                    img = augment(img, arng, true);
                }
                holders[std::size_t(i)] = resize_nearest(img, cfg.image_h, cfg.image_w);
                images[std::size_t(i)] = &holders[std::size_t(i)];
                labels[std::size_t(i)] = sample.label;
                slots[std::size_t(i)] = std::uint64_t(slot);
                if (cfg.per_sample_masks) {
                    chunk_masks.push_back(mask_sets[std::size_t(slot)]);
                }
            }
            TapeT<Scalar> tape;
            auto out = model.forward_train(&tape, images, labels,
                                           cfg.per_sample_masks ? chunk_masks : mask_sets,
                                           std::uint64_t(s), slots,
                                           Scalar(1) / Scalar(cfg.batch), true);
            tape.backward(out.loss);
            step_loss += (out.vis_ce + out.cross_ce) * double(micro) / double(cfg.batch);
        }

        opt.step(sched.at(s + 1, false), sched.at(s + 1, true));
        result.last_loss = step_loss;
        result.steps = s + 1;

        const bool last = s + 1 == total;
        const bool log_due = cfg.log_every > 0 && ((s + 1) % cfg.log_every == 0 || last);
        const bool eval_due = cfg.eval_every > 0 && ((s + 1) % cfg.eval_every == 0 || last);
        bool stop = false;
        char line[256];
        if (log_due || eval_due) {
            std::snprintf(line, sizeof line, "%lld\t%.9g\t%.9g\t%.9g",
                          static_cast<long long>(s + 1), step_loss, sched.at(s + 1, false),
                          sched.at(s + 1, true));
            std::string entry(line);
            if (eval_due) {
                const auto& eval_set = opts.eval_data ? *opts.eval_data : data;
                EvalReport rep = evaluate(model, eval_set, opts.eval_policy,
                                          cfg.eval_limit, opts.eval_threads);
                std::snprintf(line, sizeof line, "\t%.9g", rep.final);
                entry += line;
                if (rep.final > result.best_acc) {
                    result.best_acc = rep.final;
                    result.best_checkpoint = opts.out_dir + "/best.ckpt";
                    save_train_checkpoint(result.best_checkpoint, model, &opt,
                                          std::uint64_t(s + 1), std::uint64_t(total));
                }
                if (opts.stop_at_acc > 0 && rep.final >= opts.stop_at_acc) stop = true;
            }
            log << entry << '\n';
            log.flush();
        }
        if (opts.stop_after_steps > 0 && result.steps - start >= opts.stop_after_steps) {
            stop = true;
        }
        if (stop) break;
    }

    result.final_checkpoint = opts.out_dir + "/final.ckpt";
    save_train_checkpoint(result.final_checkpoint, model, &opt,
                          std::uint64_t(result.steps), std::uint64_t(total));
    return result;
}

}  // namespace cmstr
