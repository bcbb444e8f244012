#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <variant>
#include <vector>

namespace derm {

// Triangular cyclic schedule, stepped per iteration.
struct CyclicLRConfig {
    double base_lr = 1e-5;
    double max_lr = 1e-4;
    std::int64_t step_size = 500;  // iterations per half cycle
};

// Multiply by `factor` after `patience` consecutive non-improving epochs,
// never below `floor_lr`. Stepped per epoch on the validation loss.
struct PlateauConfig {
    double start_lr = 1e-3;
    double factor = 0.1;
    int patience = 10;
    double floor_lr = 1e-5;
};

// Single fixed drop after `drop_epoch` (1-based epochs).
struct StepLRConfig {
    double start_lr = 1e-3;
    double drop_to = 1e-4;
    int drop_epoch = 12;
};

using ScheduleConfig = std::variant<CyclicLRConfig, PlateauConfig, StepLRConfig>;

struct PlateauState {
    double lr = 0.0;
    double best_loss = std::numeric_limits<double>::infinity();
    int bad_epochs = 0;
};

struct EarlyStopState {
    int patience = 22;
    double best_loss = std::numeric_limits<double>::infinity();
    int best_epoch = 0;
    int epoch = 0;  // epochs observed so far
    int epochs_since_best = 0;
    bool stopped = false;
};

// lr(t) for the triangular policy:
//   cycle = floor(1 + t / (2*step)), x = |t/step - 2*cycle + 1|,
//   lr = base + (max - base) * max(0, 1 - x).
double cyclic_lr(const CyclicLRConfig& cfg, std::int64_t t);

// One epoch of the plateau policy. Improvement is strictly lower; the bad
// counter resets after each drop so one long plateau steps down one decade
// per patience window. NaN loss throws (training diverged).
PlateauState plateau_lr_step(const PlateauConfig& cfg, PlateauState state, double val_loss);

// One epoch of early stopping; sets `stopped` once the counter exceeds
// patience. Must not be called after stopped.
EarlyStopState early_stop_update(EarlyStopState state, double val_loss);

double step_lr(const StepLRConfig& cfg, int epoch);

// Anything trainable by the harness: consumes batches at a given lr, reports
// a validation loss, and snapshots/restores named checkpoints.
class TrainableModel {
public:
    virtual ~TrainableModel() = default;
    virtual double train_step(int batch_index, double lr) = 0;  // returns batch loss
    virtual double validate() = 0;
    virtual void checkpoint(const std::string& tag) = 0;
};

struct EpochLog {
    int epoch = 0;
    double lr = 0.0;
    double train_loss = 0.0;
    double val_loss = 0.0;
    bool is_best = false;
};

struct TrainingLog {
    std::vector<EpochLog> epochs;
    std::string best_tag;  // checkpoint tag of the best epoch
    int best_epoch = 0;
};

// Epoch loop: cyclic schedules advance per iteration, plateau/step per epoch.
// `batches_per_epoch` batches are fed each epoch via train_step(batch_index).
// Halts at early stop or max_epochs, never calling train_step after stop.
TrainingLog run_training_loop(TrainableModel& model, int batches_per_epoch,
                              const ScheduleConfig& sched, EarlyStopState stop, int max_epochs);

// Log rows as CSV `epoch,lr,train_loss,val_loss,is_best`.
void save_training_log(const std::string& path, const TrainingLog& log);

}  // namespace derm
