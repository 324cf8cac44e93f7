#pragma once

#include <string>
#include <vector>

#include "hrcb/encoder.hpp"
#include "hrcb/metrics.hpp"
#include "hrcb/objective.hpp"
#include "hrcb/optim.hpp"

namespace hrcb {

struct StopStrategy {
    enum class Mode { DevLoss, TrainLoss };
    Mode mode = Mode::DevLoss;
    int patience = 100;
    int max_epochs = 5000;
};

std::string to_string(StopStrategy::Mode m);
StopStrategy::Mode stop_mode_from_string(const std::string& s);

enum class StrategyKind { Normal, ED, EfD, EfED, L };

std::string to_string(StrategyKind k);
StrategyKind strategy_from_string(const std::string& s);

struct StrategySpec {
    StrategyKind kind = StrategyKind::Normal;
    double lambda = 0.5;                 // downstream weight for the L strategy
    Objective pretrain = Objective::GD;  // never LR

    void validate(Objective downstream) const;
};

struct TrainSeeds {
    std::uint64_t split = 0;
    std::uint64_t init = 0;
    std::uint64_t sample = 0;
};

struct TrainOptions {
    EncoderConfig encoder;
    Objective objective = Objective::GD;
    StopStrategy stop;
    TrainSeeds seeds;
    bool table_on_manifold = false;
    AdamMode adam_mode = AdamMode::RiemannianAdam;
    MetricOptions metric_options;
    bool evaluate_metrics = true;
};

struct TrainOutcome {
    ModelParams params;
    EmbeddingTable embedding;
    HrcScores<double> hrc;
    bool hrc_valid = false;
    double task_metric = 0.0;
    std::vector<double> train_curve, dev_curve;
    int epochs = 0;        // update steps applied
    int best_epoch = 0;
    bool failed = false;   // non-finite loss encountered
    std::string fail_reason;
    double wall_seconds = 0.0;
};

TrainOutcome train(const Dataset& data, const TrainOptions& opt);

struct StrategyOutcome {
    TrainOutcome pretrain;      // empty for Normal / L
    TrainOutcome downstream;    // carries the reported HRC and task metric
    bool has_pretrain = false;
};

StrategyOutcome run_strategy(const Dataset& data, const StrategySpec& spec,
                             const TrainOptions& downstream_opt);

// Evaluate the HRC scores of a mixed-structure embedding part by part.
std::vector<HrcScores<double>> evaluate_parts(const Dataset& data, const EmbeddingTable& E,
                                              const MetricOptions& opt = {});

}  // namespace hrcb
