#include "derm/trainsched.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "derm/error.hpp"

namespace derm {

double cyclic_lr(const CyclicLRConfig& cfg, std::int64_t t) {
    if (t < 0) throw Error("cyclic_lr: negative iteration");
    if (cfg.step_size < 1 || !(cfg.base_lr < cfg.max_lr)) throw Error("cyclic_lr: bad config");
    const double step = static_cast<double>(cfg.step_size);
    const double cycle = std::floor(1.0 + static_cast<double>(t) / (2.0 * step));
    const double x = std::fabs(static_cast<double>(t) / step - 2.0 * cycle + 1.0);
    return cfg.base_lr + (cfg.max_lr - cfg.base_lr) * std::max(0.0, 1.0 - x);
}

PlateauState plateau_lr_step(const PlateauConfig& cfg, PlateauState state, double val_loss) {
    if (std::isnan(val_loss)) throw Error("plateau_lr_step: NaN validation loss (diverged)");
    if (state.lr == 0.0) state.lr = cfg.start_lr;
    if (val_loss < state.best_loss) {
        state.best_loss = val_loss;
        state.bad_epochs = 0;
    } else {
        ++state.bad_epochs;
        if (state.bad_epochs >= cfg.patience) {
            state.lr = std::max(state.lr * cfg.factor, cfg.floor_lr);
            state.bad_epochs = 0;
        }
    }
    return state;
}

EarlyStopState early_stop_update(EarlyStopState state, double val_loss) {
    if (state.stopped) throw Error("early_stop_update: already stopped");
    if (std::isnan(val_loss)) throw Error("early_stop_update: NaN validation loss (diverged)");
    ++state.epoch;
    if (val_loss < state.best_loss) {
        state.best_loss = val_loss;
        state.best_epoch = state.epoch;
        state.epochs_since_best = 0;
    } else {
        ++state.epochs_since_best;
        if (state.epochs_since_best > state.patience) state.stopped = true;
    }
    return state;
}

double step_lr(const StepLRConfig& cfg, int epoch) {
    if (epoch < 1) throw Error("step_lr: epochs are 1-based");
    return epoch > cfg.drop_epoch ? cfg.drop_to : cfg.start_lr;
}

TrainingLog run_training_loop(TrainableModel& model, int batches_per_epoch,
                              const ScheduleConfig& sched, EarlyStopState stop, int max_epochs) {
    if (batches_per_epoch < 1 || max_epochs < 1)
        throw Error("run_training_loop: batches_per_epoch and max_epochs must be >= 1");

    TrainingLog log;
    std::int64_t iteration = 0;
    PlateauState plateau;
    for (int epoch = 1; epoch <= max_epochs; ++epoch) {
        double epoch_lr = 0.0;
        double train_loss = 0.0;
        for (int b = 0; b < batches_per_epoch; ++b) {
            double lr;
            if (const auto* cyc = std::get_if<CyclicLRConfig>(&sched)) {
                lr = cyclic_lr(*cyc, iteration++);
            } else if (const auto* pl = std::get_if<PlateauConfig>(&sched)) {
                lr = plateau.lr == 0.0 ? pl->start_lr : plateau.lr;
            } else {
                lr = step_lr(std::get<StepLRConfig>(sched), epoch);
            }
            epoch_lr = lr;
            double batch_loss;
            try {
                batch_loss = model.train_step(b, lr);
            } catch (const std::exception& e) {
                throw Error("train_step failed at epoch " + std::to_string(epoch) + " batch " +
                            std::to_string(b) + ": " + e.what());
            }
            train_loss += batch_loss;
        }
        train_loss /= batches_per_epoch;

        double val_loss;
        try {
            val_loss = model.validate();
        } catch (const std::exception& e) {
            throw Error("validate failed at epoch " + std::to_string(epoch) + ": " + e.what());
        }

        if (const auto* pl = std::get_if<PlateauConfig>(&sched))
            plateau = plateau_lr_step(*pl, plateau, val_loss);

        stop = early_stop_update(stop, val_loss);
        EpochLog row{epoch, epoch_lr, train_loss, val_loss, stop.best_epoch == epoch};
        if (row.is_best) {
            log.best_epoch = epoch;
            log.best_tag = "epoch_" + std::to_string(epoch);
            model.checkpoint(log.best_tag);
        }
        log.epochs.push_back(row);
        if (stop.stopped) break;
    }
    return log;
}

void save_training_log(const std::string& path, const TrainingLog& log) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write training log: " + path);
    out.precision(17);
    out << "epoch,lr,train_loss,val_loss,is_best\n";
    for (const auto& e : log.epochs)
        out << e.epoch << ',' << e.lr << ',' << e.train_loss << ',' << e.val_loss << ','
            << (e.is_best ? 1 : 0) << '\n';
}

}  // namespace derm
