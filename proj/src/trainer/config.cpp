#include "debris/trainer/config.hpp"

#include <cmath>
#include <set>
#include <string>

#include "debris/common/error.hpp"

namespace debris::trainer {

void TrainConfig::validate() const {
  if (batch_size < 1) throw ConfigError("training.batch_size must be >= 1");
  if (epochs < 0) throw ConfigError("training.epochs must be >= 0");
  if (!(lr_start > 0.0) || !std::isfinite(lr_start)) throw ConfigError("training.lr_start must be positive");
  if (!(lr_end >= 0.0) || lr_end > lr_start) throw ConfigError("training.lr_end must lie in [0, lr_start]");
  if (!(weight_decay >= 0.0)) throw ConfigError("training.weight_decay must be >= 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0))
    throw ConfigError("training.beta1 and training.beta2 must lie in [0, 1)");
  if (!(adam_eps > 0.0)) throw ConfigError("training.adam_eps must be positive");
  if (checkpoint_every < 1) throw ConfigError("training.checkpoint_every must be >= 1");
  double total = 0.0;
  for (double w : level_weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw ConfigError("training.level_weights must be finite and >= 0");
    total += w;
  }
  if (!(total > 0.0)) throw ConfigError("training.level_weights must not all be zero");
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = {{"batch_size", c.batch_size},
       {"epochs", c.epochs},
       {"lr_start", c.lr_start},
       {"lr_end", c.lr_end},
       {"weight_decay", c.weight_decay},
       {"beta1", c.beta1},
       {"beta2", c.beta2},
       {"adam_eps", c.adam_eps},
       {"seed", c.seed},
       {"mixed_precision", c.mixed_precision},
       {"deterministic", c.deterministic},
       {"level_weights", c.level_weights},
       {"checkpoint_every", c.checkpoint_every}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
  static const std::set<std::string> known = {"batch_size", "epochs",  "lr_start", "lr_end",
                                              "weight_decay", "beta1",  "beta2",    "adam_eps",
                                              "seed",       "mixed_precision", "deterministic",
                                              "level_weights", "checkpoint_every"};
  if (!j.is_object()) throw ConfigError("training section must be an object");
  for (const auto& [key, value] : j.items())
    if (!known.count(key)) throw ConfigError("unknown training key '" + key + "'");
  try {
    TrainConfig d;
    c.batch_size = j.value("batch_size", d.batch_size);
    c.epochs = j.value("epochs", d.epochs);
    c.lr_start = j.value("lr_start", d.lr_start);
    c.lr_end = j.value("lr_end", d.lr_end);
    c.weight_decay = j.value("weight_decay", d.weight_decay);
    c.beta1 = j.value("beta1", d.beta1);
    c.beta2 = j.value("beta2", d.beta2);
    c.adam_eps = j.value("adam_eps", d.adam_eps);
    c.seed = j.value("seed", d.seed);
    c.mixed_precision = j.value("mixed_precision", d.mixed_precision);
    c.deterministic = j.value("deterministic", d.deterministic);
    c.level_weights = j.value("level_weights", d.level_weights);
    c.checkpoint_every = j.value("checkpoint_every", d.checkpoint_every);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("training section: ") + e.what());
  }
}

}  // namespace debris::trainer
