#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <vector>

#include <nlohmann/json.hpp>

#include "gendd/losses.hpp"
#include "gendd/models.hpp"
#include "gendd/schedule.hpp"
#include "gendd/types.hpp"

namespace gendd {

struct AddTrainConfig {
    std::size_t steps = 500;
    std::size_t batch_size = 16;
    double lr_student = 1e-4;
    double lr_disc = 1e-4;
    std::uint64_t seed = 0;
    TimestepSet t_student{{250, 500, 750, 999}};
    WeightingScheme scheme{};
    double gamma = 1e-5;
    double lambda_distill = 1.0;

    std::size_t student_hidden = 32;
    std::size_t emb_dim = 32;
    std::size_t encoder_width = 16;
    std::size_t teacher_pretrain_steps = 400;
    std::size_t encoder_pretrain_steps = 200;

    std::size_t checkpoint_interval = 0; // 0 = only at the end
    std::optional<std::filesystem::path> out_dir;
};

std::size_t sample_student_timestep(const TimestepSet& tset, Rng& rng);

/// Denoising-MSE pretraining of the toy teacher on real data.
std::unique_ptr<CondDenoiser> pretrain_toy_teacher(const ImageBatch& images,
                                                   const std::vector<std::size_t>& labels,
                                                   std::size_t num_classes,
                                                   const NoiseSchedule& schedule,
                                                   const AddTrainConfig& cfg);

struct TrainState {
    std::size_t step = 0;
    Rng rng{0};
    std::vector<AddLossBundle> history;
};

/// Wires teacher, student, frozen extractor and heads into the alternating
/// adversarial + distillation objective.
class AddTrainer {
public:
    /// Pretrains teacher and extractor on the provided real data, then warm
    /// starts the student from the teacher weights.
    AddTrainer(const ImageBatch& images, const std::vector<std::size_t>& labels,
               std::size_t num_classes, AddTrainConfig cfg);

    /// One discriminator update followed by one generator update.
    AddLossBundle train_step(const ImageBatch& x0, const std::vector<std::size_t>& labels);

    /// Full loop over the stored dataset; returns the loss history.
    const std::vector<AddLossBundle>& train();

    CondDenoiser& student() { return *student_; }
    CondDenoiser& teacher() { return *teacher_; }
    FeatureEncoder& encoder() { return *encoder_; }
    DiscriminatorStack& discriminator() { return *disc_; }
    const NoiseSchedule& schedule() const { return schedule_; }
    const TrainState& state() const { return state_; }
    const AddTrainConfig& config() const { return cfg_; }

    std::uint64_t teacher_checksum() const;
    std::uint64_t encoder_checksum() const;

    nlohmann::json checkpoint_json() const;
    void save_checkpoint(const std::filesystem::path& path) const;

private:
    AddTrainConfig cfg_;
    NoiseSchedule schedule_;
    ImageBatch images_;
    std::vector<std::size_t> labels_;
    std::size_t num_classes_;
    std::unique_ptr<CondDenoiser> teacher_;
    std::unique_ptr<CondDenoiser> student_;
    std::unique_ptr<FeatureEncoder> encoder_;
    std::unique_ptr<DiscriminatorStack> disc_;
    std::unique_ptr<nn::AdamW> opt_student_;
    std::unique_ptr<nn::AdamW> opt_disc_;
    TrainState state_;
};

/// Theta-gradient of the distillation term alone, flattened over all student
/// parameters. With `stop_gradient` the teacher branch is cut; without it the
/// gradient also flows back through the teacher and the re-noising.
std::vector<double> distillation_theta_grad(CondDenoiser& student, CondDenoiser& teacher,
                                            const NoiseSchedule& schedule,
                                            const WeightingScheme& scheme, const Tensor& x_s,
                                            std::size_t s, const std::vector<std::size_t>& labels,
                                            std::size_t t, const Tensor& eps_prime,
                                            bool stop_gradient);

nlohmann::json history_to_json(const std::vector<AddLossBundle>& history);

/// Self-describing student checkpoint: schedule, student timesteps, weights.
struct StudentCheckpoint {
    std::unique_ptr<CondDenoiser> student;
    NoiseSchedule schedule;
    TimestepSet t_student;
    std::size_t num_classes = 0;
    std::size_t channels = 0;
};

StudentCheckpoint load_student_checkpoint(const std::filesystem::path& path);

} // namespace gendd
