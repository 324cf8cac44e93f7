#include "hrcb/trainer.hpp"

#include <chrono>

namespace hrcb {

using namespace ad;

std::string to_string(StopStrategy::Mode m) {
    return m == StopStrategy::Mode::DevLoss ? "dev" : "train";
}

StopStrategy::Mode stop_mode_from_string(const std::string& s) {
    if (s == "dev") return StopStrategy::Mode::DevLoss;
    if (s == "train") return StopStrategy::Mode::TrainLoss;
    throw ConfigError("unknown stop mode: " + s);
}

std::string to_string(StrategyKind k) {
    switch (k) {
        case StrategyKind::Normal: return "normal";
        case StrategyKind::ED: return "ed";
        case StrategyKind::EfD: return "efd";
        case StrategyKind::EfED: return "efed";
        case StrategyKind::L: return "l";
    }
    return "?";
}

StrategyKind strategy_from_string(const std::string& s) {
    if (s == "normal" || s == "Normal") return StrategyKind::Normal;
    if (s == "ed" || s == "ED") return StrategyKind::ED;
    if (s == "efd" || s == "EfD") return StrategyKind::EfD;
    if (s == "efed" || s == "EfED") return StrategyKind::EfED;
    if (s == "l" || s == "L") return StrategyKind::L;
    throw ConfigError("unknown strategy: " + s);
}

void StrategySpec::validate(Objective downstream) const {
    if (kind == StrategyKind::Normal) return;
    if (pretrain == Objective::LR) throw ConfigError("LR is not available as a pre-training target");
    if (pretrain == downstream)
        throw ConfigError("pre-training target must differ from the downstream target");
    if (kind == StrategyKind::L && !(lambda >= 0.0 && lambda <= 1.0))
        throw ConfigError("lambda must lie in [0,1]");
}

namespace {

struct ObjectiveData {
    Objective obj;
    EdgeSplit esplit;
    NodeSplit nsplit;
    GdPairs gd_train, gd_dev;
    std::vector<std::set<int>> nb;
    int nc = 0;
};

ObjectiveData prepare_objective(const Dataset& data, Objective obj, std::uint64_t split_seed) {
    ObjectiveData od;
    od.obj = obj;
    od.nb = data.neighbor_sets();
    if (obj == Objective::LR) {
        od.nsplit = split_nodes(data, split_seed);
        for (int l : data.labels) od.nc = std::max(od.nc, l + 1);
    } else {
        od.esplit = split_edges(data, split_seed);
        if (obj == Objective::GD) {
            od.gd_train = build_gd_pairs(data, od.esplit.train);
            od.gd_dev = build_gd_pairs(data, od.esplit.dev);
        }
    }
    return od;
}

// Loss of one partition at the given epoch (train partitions resample
// negatives per epoch; dev uses the fixed epoch-0 draw for stable stopping).
Var partition_loss(Tape& t, Var points, const Dataset& data, const ObjectiveData& od,
                   const Space& space, bool train_part, std::uint64_t sample_seed,
                   std::uint64_t epoch, const ModelParams& params, const std::vector<Var>& leaves,
                   const std::string& head_prefix) {
    switch (od.obj) {
        case Objective::GD:
            return loss_gd(t, points, space, train_part ? od.gd_train : od.gd_dev);
        case Objective::HR: {
            const auto& edges = train_part ? od.esplit.train : od.esplit.dev;
            auto negs = sample_hr_negatives(data, edges, od.nb,
                                            derive_seed(sample_seed, train_part ? "hr-t" : "hr-d"),
                                            train_part ? epoch : 0);
            return loss_hr(t, points, space, edges, negs);
        }
        case Objective::FD: {
            const auto& edges = train_part ? od.esplit.train : od.esplit.dev;
            auto negs = sample_fd_negatives(data, od.nb, static_cast<int>(edges.size()),
                                            derive_seed(sample_seed, train_part ? "fd-t" : "fd-d"),
                                            train_part ? epoch : 0);
            return loss_fd(t, points, space, edges, negs);
        }
        case Objective::LR: {
            int wi = params.find(head_prefix + "head.W");
            int bi = params.find(head_prefix + "head.b");
            if (wi < 0 || bi < 0) throw ConfigError("LR objective requires a classification head");
            const auto& nodes = train_part ? od.nsplit.train : od.nsplit.dev;
            return loss_lr(t, points, space, leaves[wi], leaves[bi], nodes, data.labels, od.nc);
        }
    }
    throw ConfigError("partition_loss: bad objective");
}

void append_head(ModelParams& p, int nc, int out_dim, std::uint64_t seed,
                 const std::string& prefix) {
    Rng rng(derive_seed(seed, "head-init"));
    Mat w(nc, out_dim);
    for (int i = 0; i < nc; ++i)
        for (int j = 0; j < out_dim; ++j) w(i, j) = rng.gaussian(0.0, 1.0 / std::sqrt(double(out_dim)));
    p.tensors.push_back({prefix + "head.W", w, true, false, Space()});
    p.tensors.push_back({prefix + "head.b", Mat::Zero(1, nc), true, false, Space()});
}

struct ForwardSpec {
    // Composition: optional frozen front encoder feeding the main encoder.
    std::optional<EncoderConfig> front_cfg;
    EncoderConfig cfg;
    std::string front_prefix, prefix;
};

Var full_forward(Tape& t, const ForwardSpec& fs, const ModelParams& params,
                 const std::vector<Var>& leaves, const Adjacency& adj) {
    if (!fs.front_cfg)
        return encoder_forward(t, fs.cfg, params, leaves, adj, fs.prefix);
    Var mid = encoder_forward(t, *fs.front_cfg, params, leaves, adj, fs.front_prefix);
    return encoder_forward(t, fs.cfg, params, leaves, adj, fs.prefix, mid);
}

struct TrainerCore {
    const Dataset& data;
    TrainOptions opt;
    ForwardSpec fs;
    ModelParams params;
    Adjacency adj;
    // primary objective + optional weighted secondary (the L strategy)
    ObjectiveData main_od;
    const ObjectiveData* extra_od = nullptr;
    double lambda = 1.0;  // weight of the main objective when extra is present

    TrainOutcome run();
    EmbeddingTable embed_current();
};

EmbeddingTable TrainerCore::embed_current() {
    Tape t;
    std::vector<Var> leaves;
    leaves.reserve(params.tensors.size());
    for (const auto& ts : params.tensors) leaves.push_back(t.constant(ts.value));
    Var pts = full_forward(t, fs, params, leaves, adj);
    EmbeddingTable E;
    E.space = fs.cfg.space;
    E.X = t.val(pts);
    return E;
}

TrainOutcome TrainerCore::run() {
    auto t0 = std::chrono::steady_clock::now();
    TrainOutcome out;

    AdamConfig acfg;
    acfg.mode = opt.adam_mode;
    AdamState ast;
    ast.init(params);

    int trainable = 0;
    for (const auto& ts : params.tensors) trainable += ts.trainable;
    int max_epochs = trainable == 0 ? 0 : opt.stop.max_epochs;

    double best = std::numeric_limits<double>::infinity();
    int best_epoch = 0;
    ModelParams snapshot = params;

    for (int epoch = 0;; ++epoch) {
        Tape t;
        std::vector<Var> leaves;
        leaves.reserve(params.tensors.size());
        for (const auto& ts : params.tensors) leaves.push_back(t.constant(ts.value));
        Var pts = full_forward(t, fs, params, leaves, adj);

        auto loss_of = [&](const ObjectiveData& od, bool train_part) {
            return partition_loss(t, pts, data, od, fs.cfg.space, train_part, opt.seeds.sample,
                                  epoch, params, leaves, fs.prefix);
        };
        Var train_loss = loss_of(main_od, true);
        Var dev_loss = loss_of(main_od, false);
        if (extra_od) {
            train_loss = add(scale(train_loss, lambda), scale(loss_of(*extra_od, true), 1.0 - lambda));
            dev_loss = add(scale(dev_loss, lambda), scale(loss_of(*extra_od, false), 1.0 - lambda));
        }
        double ltr = t.val(train_loss)(0, 0);
        double ldv = t.val(dev_loss)(0, 0);
        if (!std::isfinite(ltr) || !std::isfinite(ldv)) {
            out.failed = true;
            out.fail_reason = "non-finite loss at epoch " + std::to_string(epoch);
            break;
        }
        out.train_curve.push_back(ltr);
        out.dev_curve.push_back(ldv);

        double stop_val = opt.stop.mode == StopStrategy::Mode::DevLoss ? ldv : ltr;
        if (stop_val < best) {
            best = stop_val;
            best_epoch = epoch;
            snapshot = params;
        }
        if (epoch - best_epoch >= opt.stop.patience) break;
        if (epoch >= max_epochs) break;

        try {
            t.backward(train_loss);
        } catch (const NumericError& e) {
            out.failed = true;
            out.fail_reason = e.what();
            break;
        }
        std::vector<Mat> grads(params.tensors.size());
        for (size_t i = 0; i < params.tensors.size(); ++i)
            if (params.tensors[i].trainable) grads[i] = t.grad(leaves[i]);
        adam_step(params, grads, ast, acfg);
        out.epochs = epoch + 1;
    }

    params = snapshot;  // restore the best checkpoint
    out.best_epoch = best_epoch;
    out.params = params;
    out.embedding = embed_current();

    if (opt.evaluate_metrics && data.tree) {
        out.hrc = evaluate_embedding(*data.tree, out.embedding, opt.metric_options);
        out.hrc_valid = true;
    }

    // task metric on the test partition
    switch (main_od.obj) {
        case Objective::GD:
            out.task_metric = out.hrc_valid ? -out.hrc.m_dist_norm : 0.0;
            break;
        case Objective::HR: {
            auto negs = sample_hr_negatives(data, main_od.esplit.test, main_od.nb,
                                            derive_seed(opt.seeds.sample, "hr-eval"), 0);
            out.task_metric = hr_accuracy(out.embedding, main_od.esplit.test, negs);
            break;
        }
        case Objective::FD: {
            auto negs = sample_fd_negatives(data, main_od.nb,
                                            static_cast<int>(main_od.esplit.test.size()),
                                            derive_seed(opt.seeds.sample, "fd-eval"), 0);
            out.task_metric = fd_accuracy(out.embedding, main_od.esplit.test, negs);
            break;
        }
        case Objective::LR: {
            out.task_metric = lr_accuracy(out.embedding, params.at(fs.prefix + "head.W").value,
                                          params.at(fs.prefix + "head.b").value, main_od.nsplit.test,
                                          data.labels);
            break;
        }
    }

    out.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return out;
}

TrainerCore make_core(const Dataset& data, const TrainOptions& opt) {
    TrainerCore core{data, opt, {}, {}, {}, {}, nullptr, 1.0};
    core.fs.cfg = opt.encoder;
    core.adj = build_adjacency(data.n, data.edges);
    core.params = init_encoder_params(opt.encoder, data.n, opt.seeds.init, opt.table_on_manifold);
    core.main_od = prepare_objective(data, opt.objective, opt.seeds.split);
    if (opt.objective == Objective::LR)
        append_head(core.params, core.main_od.nc, opt.encoder.output_dim, opt.seeds.init, "");
    return core;
}

}  // namespace

TrainOutcome train(const Dataset& data, const TrainOptions& opt) {
    TrainerCore core = make_core(data, opt);
    return core.run();
}

StrategyOutcome run_strategy(const Dataset& data, const StrategySpec& spec,
                             const TrainOptions& dopt) {
    spec.validate(dopt.objective);
    StrategyOutcome out;

    if (spec.kind == StrategyKind::Normal) {
        out.downstream = train(data, dopt);
        return out;
    }

    if (spec.kind == StrategyKind::L) {
        TrainerCore core = make_core(data, dopt);
        ObjectiveData extra = prepare_objective(data, spec.pretrain, dopt.seeds.split);
        core.extra_od = &extra;
        core.lambda = spec.lambda;
        out.downstream = core.run();
        return out;
    }

    // two-phase strategies: pre-train on the auxiliary objective first
    TrainOptions popt = dopt;
    popt.objective = spec.pretrain;
    popt.evaluate_metrics = dopt.evaluate_metrics;
    if (spec.kind == StrategyKind::EfED) popt.encoder.output_dim = dopt.encoder.hidden_dim;

    out.has_pretrain = true;
    if (spec.kind == StrategyKind::ED) {
        out.pretrain = train(data, popt);
        TrainerCore core = make_core(data, dopt);
        // continue from the pre-trained tensors, everything stays trainable
        for (auto& ts : core.params.tensors) {
            int i = out.pretrain.params.find(ts.name);
            if (i >= 0) ts.value = out.pretrain.params.tensors[i].value;
        }
        out.downstream = core.run();
        return out;
    }

    if (spec.kind == StrategyKind::EfD) {
        out.pretrain = train(data, popt);
        TrainerCore core = make_core(data, dopt);
        for (auto& ts : core.params.tensors) {
            int i = out.pretrain.params.find(ts.name);
            if (i >= 0) {
                ts.value = out.pretrain.params.tensors[i].value;
                ts.trainable = false;  // encoder frozen; only head-style tensors train
            }
        }
        out.downstream = core.run();
        return out;
    }

    // EfED: frozen pre-trained encoder feeds a fresh encoder + decoder
    TrainerCore pre = make_core(data, popt);
    out.pretrain = pre.run();

    TrainerCore core{data, dopt, {}, {}, {}, {}, nullptr, 1.0};
    core.adj = build_adjacency(data.n, data.edges);
    core.main_od = prepare_objective(data, dopt.objective, dopt.seeds.split);

    EncoderConfig front_cfg = popt.encoder;  // output dim = hidden dim
    EncoderConfig fresh = dopt.encoder;
    fresh.input_dim = front_cfg.output_dim;
    core.fs.cfg = fresh;
    core.fs.front_cfg = front_cfg;
    core.fs.front_prefix = "pre.";
    core.fs.prefix = "";

    ModelParams combined;
    for (auto ts : out.pretrain.params.tensors) {
        ts.name = "pre." + ts.name;
        ts.trainable = false;
        combined.tensors.push_back(std::move(ts));
    }
    ModelParams fresh_params = init_encoder_params(fresh, data.n,
                                                   derive_seed(dopt.seeds.init, "efed-fresh"),
                                                   dopt.table_on_manifold, "", /*with_table=*/false);
    for (auto& ts : fresh_params.tensors) combined.tensors.push_back(std::move(ts));
    core.params = std::move(combined);
    if (dopt.objective == Objective::LR)
        append_head(core.params, core.main_od.nc, fresh.output_dim, dopt.seeds.init, "");
    out.downstream = core.run();
    return out;
}

std::vector<HrcScores<double>> evaluate_parts(const Dataset& data, const EmbeddingTable& E,
                                              const MetricOptions& opt) {
    std::vector<HrcScores<double>> out;
    for (size_t p = 0; p < data.parts.size(); ++p) {
        const Hierarchy& h = data.parts[p];
        EmbeddingTable sub;
        sub.space = E.space;
        sub.X = ad::Mat(h.n, E.X.cols());
        for (int v = 0; v < h.n; ++v) sub.X.row(v) = E.X.row(data.part_map[p][v]);
        out.push_back(evaluate_embedding(h, sub, opt));
    }
    return out;
}

}  // namespace hrcb
