#pragma once

#include <map>
#include <string>
#include <vector>

#include "umit/config.hpp"
#include "umit/data.hpp"
#include "umit/features.hpp"
#include "umit/losses.hpp"
#include "umit/model.hpp"
#include "umit/params.hpp"

namespace umit {

// Adam moments keyed like the parameter map they update; t counts completed
// steps and drives bias correction.
struct AdamState {
  std::map<std::string, std::vector<float>> m, v;
  long long t = 0;
};

// One update over every parameter, in map order. Every parameter must carry a
// gradient; a missing one is a contract violation, not a skip.
void adam_step(ParamMap<float>& params, AdamState& st, float lr, float b1, float b2,
               float eps);
void zero_grads(ParamMap<float>& params);

// base lr for iter < decay_point, base / decay_factor from decay_point on
float lr_schedule(const TrainConfig& cfg, long long iter);

struct Models {
  GeneratorConfig gcfg;
  DiscriminatorConfig dcfg;
  ParamMap<float> g, d;
  FeatureExtractor<float> fe;
};

Models init_models(const TrainConfig& cfg);

// One iteration: d_steps_per_g critic updates, then one generator update on
// freshly generated fakes. All randomness comes from named streams keyed by
// (seed, iter), so a resumed run replays the exact same draws. Throws on any
// non-finite loss term, naming the term and iteration.
LossReport<float> train_step(Models& m, AdamState& opt_g, AdamState& opt_d,
                             const Dataset& ds, const TrainConfig& cfg, long long iter);

// Checkpoint with model tensors, optimizer moments and enough metadata to
// rebuild configs; next_iter is the first iteration still to run.
void write_train_checkpoint(const std::string& path, const Models& m,
                            const AdamState& opt_g, const AdamState& opt_d,
                            long long next_iter, const TrainConfig& cfg);

struct LoadedTrain {
  Models models;
  AdamState opt_g, opt_d;
  long long next_iter = 0;
};
LoadedTrain load_train_checkpoint(const std::string& path);

// iter then the twelve report columns, tab separated, %.7g, no newline
std::string format_log_line(long long iter, const LossReport<float>& rep, float lr);

// Full run into out_dir: train.log (one line per step), numbered checkpoints
// every ckpt_interval plus checkpoint-final.ckpt, sample grids every
// sample_interval. resume_ckpt continues from a saved state (log appends).
// progress, when set, receives an echo line roughly every 100 iterations.
void train(const TrainConfig& cfg, const std::string& out_dir,
           const std::string& resume_ckpt = "", std::ostream* progress = nullptr);

}  // namespace umit
