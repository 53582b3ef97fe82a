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

#include "cmstr/cli.hpp"

#include <cstdio>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cmstr/data.hpp"
#include "cmstr/decoding.hpp"
#include "cmstr/masks.hpp"
#include "cmstr/model.hpp"
#include "cmstr/trainer.hpp"

namespace cmstr {
namespace {

std::vector<std::string> split_commas(const std::string& s) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (start <= s.size()) {
        auto comma = s.find(',', start);
        if (comma == std::string::npos) {
            if (start < s.size()) out.push_back(s.substr(start));
            break;
        }
        if (comma > start) out.push_back(s.substr(start, comma - start));
        start = comma + 1;
    }
    return out;
}

struct LoadedModel {
    Config cfg;
    ModelT<float> model;

    explicit LoadedModel(const CheckpointData& ck)
        : cfg(config_from_checkpoint(ck)), model(cfg) {
        restore_store(ck, model.store());
    }
};

int cmd_gen_data(const std::string& out, int count, std::uint64_t seed,
                 const std::string& vocab_file, const std::string& corruptions) {
    GenOptions opts;
    opts.count = count;
    opts.seed = seed;
    opts.categories = split_commas(corruptions);
    if (!vocab_file.empty()) {
        opts.vocab = read_word_list(vocab_file);
    } else {
        Config defaults;
        opts.vocab = make_vocabulary(256, 3, 10, seed, defaults.resolved_train_charset());
    }
    generate_dataset(out, opts);
    write_word_list(out + "/vocab.txt", opts.vocab);

    std::map<std::string, int> counts;
    for (const auto& e : read_manifest(out)) {
        for (const auto& t : e.tags) ++counts[t];
    }
    for (const auto& [tag, n] : counts) std::cout << tag << '\t' << n << '\n';
    return 0;
}

int cmd_train(const std::string& config_file, const std::string& data_dir,
              const std::string& out, std::int64_t seed_flag, const std::string& resume,
              const std::string& eval_dir, double stop_at_acc, int threads) {
    Config cfg;
    if (!config_file.empty()) cfg.apply_file(config_file);
    if (seed_flag >= 0) cfg.seed = std::uint64_t(seed_flag);
    cfg.validate();

    ModelT<float> model(cfg);
    std::vector<Sample> data = load_dataset(data_dir);
    std::vector<Sample> eval_data;
    TrainOptions opts;
    opts.out_dir = out;
    opts.resume = resume;
    opts.stop_at_acc = stop_at_acc;
    opts.eval_threads = threads;
    opts.eval_policy.refine_iters = cfg.refine_iters;
    opts.eval_policy.fast_cross = cfg.fast_cross;
    if (!eval_dir.empty()) {
        eval_data = load_dataset(eval_dir);
        opts.eval_data = &eval_data;
    }

    TrainResult res = train_loop(model, data, opts);
    std::cout << "steps\t" << res.steps << '/' << res.total_steps << '\n';
    std::printf("loss\t%.9g\n", res.last_loss);
    if (res.best_acc >= 0) std::printf("best_acc\t%.9g\n", res.best_acc);
    std::cout << "checkpoint\t" << res.final_checkpoint << '\n';
    return 0;
}

int cmd_eval(const std::string& ckpt, const std::string& data_dir, int limit, int threads,
             const std::string& dump, int refine_flag, int fast_flag) {
    LoadedModel lm(read_checkpoint(ckpt));
    DecodePolicy policy;
    policy.refine_iters = refine_flag >= 0 ? refine_flag : lm.cfg.refine_iters;
    policy.fast_cross = fast_flag >= 0 ? fast_flag != 0 : lm.cfg.fast_cross;

    std::vector<Sample> data = load_dataset(data_dir);
    EvalReport rep = evaluate(lm.model, data, policy, limit, threads);

    std::printf("overall\tvisual\t%.6f\n", rep.visual);
    std::printf("overall\tcross\t%.6f\n", rep.cross);
    std::printf("overall\tfinal\t%.6f\n", rep.final);
    for (const auto& tag : corruption_categories()) {
        auto it = rep.per_tag.find(tag);
        if (it == rep.per_tag.end() || it->second.n == 0) {
            std::printf("%s\tvisual\tn/a\n%s\tcross\tn/a\n%s\tfinal\tn/a\n", tag.c_str(),
                        tag.c_str(), tag.c_str());
            continue;
        }
        const auto& c = it->second;
        std::printf("%s\tvisual\t%.6f\n", tag.c_str(), double(c.visual) / c.n);
        std::printf("%s\tcross\t%.6f\n", tag.c_str(), double(c.cross) / c.n);
        std::printf("%s\tfinal\t%.6f\n", tag.c_str(), double(c.final) / c.n);
    }

    if (!dump.empty()) {
        std::ofstream f(dump, std::ios::trunc);
        if (!f) throw DataError("cannot open dump file: " + dump);
        const auto manifest = read_manifest(data_dir);
        for (std::size_t i = 0; i < rep.samples.size(); ++i) {
            const auto& p = rep.samples[i];
            f << manifest[i].relpath << '\t' << manifest[i].label << '\t' << p.visual
              << '\t' << p.cross << '\t' << p.final << '\n';
        }
    }
    return 0;
}

int cmd_predict(const std::string& ckpt, const std::vector<std::string>& paths,
                int refine_flag, int fast_flag) {
    LoadedModel lm(read_checkpoint(ckpt));
    DecodePolicy policy;
    policy.refine_iters = refine_flag >= 0 ? refine_flag : lm.cfg.refine_iters;
    policy.fast_cross = fast_flag >= 0 ? fast_flag != 0 : lm.cfg.fast_cross;

    int failures = 0;
    for (const auto& path : paths) {
        try {
            Image img = read_ppm(path);
            img = resize_nearest(img, lm.cfg.image_h, lm.cfg.image_w);
            Prediction p = predict(lm.model, img, policy);
            std::cout << path << '\t' << p.visual << '\t' << p.cross << '\t' << p.final
                      << '\n';
        } catch (const DataError& e) {
            std::cerr << path << ": " << e.what() << '\n';
            ++failures;
        }
    }
    return failures == 0 ? 0 : 3;
}

int cmd_inspect_masks(int n, int k, std::uint64_t seed, bool pairing) {
    Rng rng = Rng::derive(seed, 0x6d736b, 0);
    std::vector<MatF> masks = sample_training_masks(k, n, rng, pairing);
    for (std::size_t i = 0; i < masks.size(); ++i) {
        std::cout << "mask " << i;
        if (i == 0) std::cout << " (L2R)";
        if (i == 1) std::cout << " (R2L)";
        std::cout << '\n' << render_mask(masks[i]);
    }
    return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
    CLI::App app{"dual-branch scene-text recognizer"};
    app.require_subcommand(1);

    auto* gen = app.add_subcommand("gen-data", "render a synthetic word-image dataset");
    std::string gen_out, gen_vocab, gen_corruptions;
    int gen_count = 100;
    std::uint64_t gen_seed = 42;
    gen->add_option("--out", gen_out, "output directory")->required();
    gen->add_option("--count", gen_count, "number of samples");
    gen->add_option("--seed", gen_seed, "generation seed");
    gen->add_option("--vocab", gen_vocab, "word list file, one word per line");
    gen->add_option("--corruptions", gen_corruptions,
                    "comma-separated categories (default: all)");

    auto* train = app.add_subcommand("train", "train from a config and dataset");
    std::string tr_config, tr_data, tr_out, tr_resume, tr_eval;
    std::int64_t tr_seed = -1;
    double tr_stop = -1.0;
    int tr_threads = 1;
    train->add_option("--config", tr_config, "config file (key = value lines)");
    train->add_option("--data", tr_data, "training dataset directory")->required();
    train->add_option("--out", tr_out, "output directory")->required();
    train->add_option("--seed", tr_seed, "override config seed");
    train->add_option("--resume", tr_resume, "checkpoint to resume from");
    train->add_option("--eval-data", tr_eval, "held-out dataset for periodic eval");
    train->add_option("--stop-at-acc", tr_stop, "early-stop accuracy threshold");
    train->add_option("--threads", tr_threads, "threads for periodic eval");

    auto* ev = app.add_subcommand("eval", "report word accuracy on a dataset");
    std::string ev_ckpt, ev_data, ev_dump;
    int ev_limit = 0, ev_threads = 1, ev_refine = -1, ev_fast = -1;
    ev->add_option("--checkpoint", ev_ckpt, "model checkpoint")->required();
    ev->add_option("--data", ev_data, "dataset directory")->required();
    ev->add_option("--limit", ev_limit, "evaluate at most this many samples");
    ev->add_option("--threads", ev_threads, "inference threads");
    ev->add_option("--dump", ev_dump, "write per-sample predictions here");
    ev->add_option("--refine", ev_refine, "override refinement iterations");
    ev->add_option("--fast-cross", ev_fast, "override fast cross-modal decode (0/1)");

    auto* pr = app.add_subcommand("predict", "decode word images");
    std::string pr_ckpt;
    std::vector<std::string> pr_paths;
    int pr_refine = -1, pr_fast = -1;
    pr->add_option("--checkpoint", pr_ckpt, "model checkpoint")->required();
    pr->add_option("--refine", pr_refine, "override refinement iterations");
    pr->add_option("--fast-cross", pr_fast, "override fast cross-modal decode (0/1)");
    pr->add_option("images", pr_paths, "PPM images to decode")->required();

    auto* im = app.add_subcommand("inspect-masks", "print sampled attention masks");
    int im_n = 7, im_k = 6;
    std::uint64_t im_seed = 42;
    bool im_pairing = false;
    im->add_option("--n", im_n, "mask side length");
    im->add_option("--k", im_k, "number of masks");
    im->add_option("--seed", im_seed, "sampling seed");
    im->add_flag("--pairing", im_pairing, "pair each random mask with its reverse");

    try {
        app.parse(argc, argv);
        if (gen->parsed()) {
            return cmd_gen_data(gen_out, gen_count, gen_seed, gen_vocab, gen_corruptions);
        }
        if (train->parsed()) {
            return cmd_train(tr_config, tr_data, tr_out, tr_seed, tr_resume, tr_eval,
                             tr_stop, tr_threads);
        }
        if (ev->parsed()) {
            return cmd_eval(ev_ckpt, ev_data, ev_limit, ev_threads, ev_dump, ev_refine,
                            ev_fast);
        }
        if (pr->parsed()) return cmd_predict(pr_ckpt, pr_paths, pr_refine, pr_fast);
        if (im->parsed()) return cmd_inspect_masks(im_n, im_k, im_seed, im_pairing);
        return 1;
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return 3;
    } catch (const CheckpointError& e) {
        std::cerr << "checkpoint error: " << e.what() << '\n';
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}

}  // namespace cmstr
