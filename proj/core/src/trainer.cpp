#include "gendd/trainer.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

namespace gendd {

std::size_t sample_student_timestep(const TimestepSet& tset, Rng& rng) {
    if (tset.taus.empty()) throw std::invalid_argument("sample_student_timestep: empty set");
    return tset.taus[rng.uniform_int(tset.taus.size())];
}

namespace {

Tensor normal_like(const std::vector<std::size_t>& shape, Rng& rng) {
    Tensor t(shape);
    for (double& v : t.data) v = rng.normal();
    return t;
}

ImageBatch wrap_symmetric(Tensor data) {
    ImageBatch b;
    b.data = std::move(data);
    b.range = ValueRange::Symmetric;
    return b;
}

void gather_batch(const ImageBatch& images, const std::vector<std::size_t>& labels,
                  std::size_t batch_size, Rng& rng, Tensor& xb, std::vector<std::size_t>& yb) {
    std::size_t n = images.count();
    std::size_t per = images.channels() * images.height() * images.width();
    xb = Tensor({batch_size, images.channels(), images.height(), images.width()});
    yb.resize(batch_size);
    for (std::size_t b = 0; b < batch_size; ++b) {
        std::size_t idx = rng.uniform_int(n);
        yb[b] = labels[idx];
        std::copy(&images.data.data[idx * per], &images.data.data[(idx + 1) * per],
                  &xb.data[b * per]);
    }
}

} // namespace

std::unique_ptr<CondDenoiser> pretrain_toy_teacher(const ImageBatch& images,
                                                   const std::vector<std::size_t>& labels,
                                                   std::size_t num_classes,
                                                   const NoiseSchedule& schedule,
                                                   const AddTrainConfig& cfg) {
    if (images.count() == 0) throw std::invalid_argument("pretrain_toy_teacher: empty dataset");
    auto model = std::make_unique<CondDenoiser>(images.channels(), num_classes, cfg.student_hidden,
                                                cfg.emb_dim, derive_seed(cfg.seed, {101}));
    auto params = model->parameters();
    nn::AdamW opt(params, 1e-3);
    Rng rng = Rng::derive(cfg.seed, {102});
    ImageBatch sym = to_symmetric(images);

    for (std::size_t step = 0; step < cfg.teacher_pretrain_steps; ++step) {
        Tensor xb;
        std::vector<std::size_t> yb;
        gather_batch(sym, labels, std::min(cfg.batch_size, images.count()), rng, xb, yb);
        std::size_t t = 1 + rng.uniform_int(schedule.t_max());
        Tensor eps = normal_like(xb.shape, rng);
        ImageBatch x0 = wrap_symmetric(xb);
        ImageBatch xt = add_noise(x0, t, eps, schedule);
        Tensor out = model->forward(xt.data, t, yb);
        // plain denoising MSE toward the clean sample
        Tensor dout(out.shape);
        double inv = 2.0 / static_cast<double>(out.size());
        for (std::size_t i = 0; i < out.size(); ++i) dout[i] = inv * (out[i] - xb[i]);
        opt.zero_grad();
        model->backward(dout);
        opt.step();
    }
    return model;
}

AddTrainer::AddTrainer(const ImageBatch& images, const std::vector<std::size_t>& labels,
                       std::size_t num_classes, AddTrainConfig cfg)
    : cfg_(std::move(cfg)), images_(images), labels_(labels), num_classes_(num_classes) {
    if (images_.count() == 0) throw std::invalid_argument("AddTrainer: empty dataset");
    if (images_.count() < cfg_.batch_size)
        throw std::invalid_argument("AddTrainer: dataset smaller than batch size");
    schedule_ = make_linear_beta_schedule();
    cfg_.t_student.validate(schedule_.t_max());

    teacher_ = pretrain_toy_teacher(images_, labels_, num_classes_, schedule_, cfg_);
    student_ = std::make_unique<CondDenoiser>(images_.channels(), num_classes_, cfg_.student_hidden,
                                              cfg_.emb_dim, derive_seed(cfg_.seed, {103}));
    student_->copy_parameters_from(*teacher_); // distillation warm start

    encoder_ = std::make_unique<FeatureEncoder>(images_.channels(), cfg_.encoder_width,
                                                derive_seed(cfg_.seed, {104}));
    pretrain_feature_encoder(*encoder_, images_, labels_, num_classes_,
                             cfg_.encoder_pretrain_steps, std::min(cfg_.batch_size, images_.count()),
                             1e-3, derive_seed(cfg_.seed, {105}));
    disc_ = std::make_unique<DiscriminatorStack>(encoder_.get(), images_.channels(),
                                                 images_.height(), derive_seed(cfg_.seed, {106}));

    opt_student_ = std::make_unique<nn::AdamW>(student_->parameters(), cfg_.lr_student);
    opt_disc_ = std::make_unique<nn::AdamW>(disc_->parameters(), cfg_.lr_disc);
    state_.rng = Rng::derive(cfg_.seed, {107});
}

AddLossBundle AddTrainer::train_step(const ImageBatch& x0, const std::vector<std::size_t>& labels) {
    if (x0.count() == 0) throw std::invalid_argument("train_step: empty batch");
    Rng& rng = state_.rng;

    ImageBatch x0_sym = x0.range == ValueRange::Symmetric ? x0 : to_symmetric(x0);

    // ---- discriminator update (hinge loss with R1 on the real samples) ----
    std::size_t s = sample_student_timestep(cfg_.t_student, rng);
    Tensor eps = normal_like(x0_sym.data.shape, rng);
    ImageBatch x_s = add_noise(x0_sym, s, eps, schedule_);
    Tensor xhat = student_->forward(x_s.data, s, labels);

    auto acts_fake = encoder_->forward_taps(xhat);
    HeadOutputs fake_heads = disc_->heads_from_acts(acts_fake);
    auto acts_real = encoder_->forward_taps(x0_sym.data);
    HeadOutputs real_heads = disc_->heads_from_acts(acts_real);

    Tensor g = disc_->summed_head_input_gradient(acts_real);
    double r1 = r1_from_input_gradient(g);
    double disc_loss = discriminator_hinge_loss(real_heads, fake_heads, r1, cfg_.gamma);

    opt_disc_->zero_grad();
    disc_->head_backward(acts_real, hinge_grad_real(real_heads));
    disc_->head_backward(acts_fake, hinge_grad_fake(fake_heads));
    disc_->accumulate_r1_grad(acts_real, g, cfg_.gamma);
    opt_disc_->step();

    // ---- generator update (adversarial + weighted distillation) ----------
    auto acts_fake2 = encoder_->forward_taps(xhat);
    HeadOutputs fake_heads2 = disc_->heads_from_acts(acts_fake2);
    double gen_adv = generator_adversarial_loss(fake_heads2);
    Tensor dxhat = disc_->input_backward(acts_fake2, generator_adversarial_grad(fake_heads2));

    std::size_t t = rng.uniform_int(schedule_.t_max() + 1);
    Tensor eps_prime = normal_like(xhat.shape, rng);
    // teacher sees the re-noised stop-gradient of the student output
    ImageBatch xhat_sg = wrap_symmetric(xhat);
    ImageBatch xhat_t = add_noise(xhat_sg, t, eps_prime, schedule_);
    Tensor teacher_out = teacher_->forward(xhat_t.data, t, labels);

    ImageBatch student_b = wrap_symmetric(xhat);
    ImageBatch teacher_b = wrap_symmetric(teacher_out);
    double distill = distillation_loss(student_b, teacher_b, t, cfg_.scheme, schedule_);
    Tensor dd = distillation_grad(student_b, teacher_b, t, cfg_.scheme, schedule_);
    for (std::size_t i = 0; i < dxhat.size(); ++i) dxhat[i] += cfg_.lambda_distill * dd[i];

    opt_student_->zero_grad();
    student_->backward(dxhat);
    opt_student_->step();

    AddLossBundle bundle;
    bundle.gen_adv = gen_adv;
    bundle.disc = disc_loss;
    bundle.distill = distill;
    bundle.r1 = r1;
    bundle.per_head_means.assign(fake_heads2.heads(), 0.0);
    for (std::size_t k = 0; k < fake_heads2.heads(); ++k) {
        double acc = 0.0;
        for (std::size_t i = 0; i < fake_heads2.count(); ++i) acc += fake_heads2.values.at2(i, k);
        bundle.per_head_means[k] = acc / static_cast<double>(fake_heads2.count());
    }

    if (!std::isfinite(bundle.gen_adv) || !std::isfinite(bundle.disc) ||
        !std::isfinite(bundle.distill) || !std::isfinite(bundle.r1)) {
        throw std::runtime_error("train_step: non-finite loss at step " +
                                 std::to_string(state_.step) + " (gen_adv=" +
                                 std::to_string(bundle.gen_adv) + ", disc=" +
                                 std::to_string(bundle.disc) + ", distill=" +
                                 std::to_string(bundle.distill) + ", r1=" +
                                 std::to_string(bundle.r1) + ")");
    }

    state_.step++;
    state_.history.push_back(bundle);
    return bundle;
}

const std::vector<AddLossBundle>& AddTrainer::train() {
    for (std::size_t i = state_.step; i < cfg_.steps; ++i) {
        Tensor xb;
        std::vector<std::size_t> yb;
        gather_batch(images_, labels_, cfg_.batch_size, state_.rng, xb, yb);
        ImageBatch batch;
        batch.data = std::move(xb);
        batch.range = images_.range;
        train_step(batch, yb);
        if (cfg_.out_dir && cfg_.checkpoint_interval > 0 &&
            state_.step % cfg_.checkpoint_interval == 0) {
            save_checkpoint(*cfg_.out_dir /
                            ("checkpoint_" + std::to_string(state_.step) + ".json"));
        }
    }
    if (cfg_.out_dir) save_checkpoint(*cfg_.out_dir / "checkpoint_final.json");
    return state_.history;
}

std::uint64_t AddTrainer::teacher_checksum() const {
    return nn::params_checksum(const_cast<CondDenoiser&>(*teacher_).parameters());
}

std::uint64_t AddTrainer::encoder_checksum() const { return encoder_->checksum(); }

nlohmann::json AddTrainer::checkpoint_json() const {
    nlohmann::json j;
    j["version"] = 1;
    j["type"] = "gendd-student-checkpoint";
    j["schedule"] = {{"kind", "linear_beta"}, {"steps", schedule_.t_max()}};
    j["t_student"] = cfg_.t_student.taus;
    j["config"] = {{"steps", cfg_.steps},
                   {"batch_size", cfg_.batch_size},
                   {"lr_student", cfg_.lr_student},
                   {"lr_disc", cfg_.lr_disc},
                   {"seed", cfg_.seed},
                   {"gamma", cfg_.gamma},
                   {"lambda_distill", cfg_.lambda_distill},
                   {"scheme", cfg_.scheme.kind == WeightingKind::Exponential ? "exponential" : "sds"}};
    j["student"] = student_->state_to_json();
    j["trained_steps"] = state_.step;
    return j;
}

void AddTrainer::save_checkpoint(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_checkpoint: cannot write '" + path.string() + "'");
    out << checkpoint_json().dump() << "\n";
}

StudentCheckpoint load_student_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_student_checkpoint: cannot open '" + path.string() + "'");
    nlohmann::json j;
    in >> j;
    if (j.at("type") != "gendd-student-checkpoint")
        throw std::runtime_error("load_student_checkpoint: not a student checkpoint");

    StudentCheckpoint ck;
    ck.schedule = make_linear_beta_schedule(j.at("schedule").at("steps").get<std::size_t>());
    ck.t_student.taus = j.at("t_student").get<std::vector<std::size_t>>();
    const auto& st = j.at("student");
    ck.channels = st.at("channels").get<std::size_t>();
    ck.num_classes = st.at("num_classes").get<std::size_t>();
    ck.student = std::make_unique<CondDenoiser>(ck.channels, ck.num_classes,
                                                st.at("hidden").get<std::size_t>(),
                                                st.at("emb_dim").get<std::size_t>(), 0);
    ck.student->load_state(st);
    return ck;
}

std::vector<double> distillation_theta_grad(CondDenoiser& student, CondDenoiser& teacher,
                                            const NoiseSchedule& schedule,
                                            const WeightingScheme& scheme, const Tensor& x_s,
                                            std::size_t s, const std::vector<std::size_t>& labels,
                                            std::size_t t, const Tensor& eps_prime,
                                            bool stop_gradient) {
    Tensor xhat = student.forward(x_s, s, labels);
    ImageBatch xhat_b = wrap_symmetric(xhat);
    ImageBatch xhat_t = add_noise(xhat_b, t, eps_prime, schedule);
    Tensor teacher_out = teacher.forward(xhat_t.data, t, labels);
    ImageBatch teacher_b = wrap_symmetric(teacher_out);

    Tensor dxhat = distillation_grad(xhat_b, teacher_b, t, scheme, schedule);
    if (!stop_gradient) {
        // teacher branch: d loss/d teacher_out = -d loss/d xhat (direct term),
        // chained through the teacher and the re-noising x_t = a*xhat + s*eps'
        Tensor dteacher(dxhat.shape);
        for (std::size_t i = 0; i < dxhat.size(); ++i) dteacher[i] = -dxhat[i];
        for (auto* p : teacher.parameters()) p->zero_grad();
        Tensor dxt = teacher.backward(dteacher);
        double a = schedule.alpha(t);
        for (std::size_t i = 0; i < dxhat.size(); ++i) dxhat[i] += a * dxt[i];
    }

    for (auto* p : student.parameters()) p->zero_grad();
    student.backward(dxhat);
    std::vector<double> flat;
    for (auto* p : student.parameters())
        flat.insert(flat.end(), p->grad.data.begin(), p->grad.data.end());
    return flat;
}

nlohmann::json history_to_json(const std::vector<AddLossBundle>& history) {
    nlohmann::json arr = nlohmann::json::array();
    for (std::size_t i = 0; i < history.size(); ++i) {
        const auto& b = history[i];
        arr.push_back({{"step", i},
                       {"gen_adv", b.gen_adv},
                       {"disc", b.disc},
                       {"distill", b.distill},
                       {"r1", b.r1}});
    }
    return arr;
}

} // namespace gendd
