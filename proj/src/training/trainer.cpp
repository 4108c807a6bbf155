#include <cmath>
#include <cstdlib>
#include <sstream>
#include <thread>

#include "mript/ops.hpp"
#include "mript/training.hpp"

namespace mript::training {

std::size_t default_threads() {
  const char* env = std::getenv("MRIPT_THREADS");
  if (env == nullptr || *env == '\0') return 1;
  char* end = nullptr;
  const long n = std::strtol(env, &end, 10);
  if (*end != '\0' || n < 0) {
    fail(ErrorCode::kInvalidArgument, "MRIPT_THREADS must be a non-negative integer");
  }
  return n == 0 ? 1 : static_cast<std::size_t>(n);
}

std::size_t planned_steps(const TrainConfig& config, const dataio::SampleStream& stream) {
  if (config.max_steps) return *config.max_steps;
  const std::size_t n = stream.images_per_epoch();
  return config.epochs * ((n + config.batch_size - 1) / config.batch_size);
}

SampleGradient sample_gradient(const MrIpt<float>& model, const dataio::Sample& sample) {
  numerics::Tape<float> tape;
  model::Session<float> session(model, tape);
  auto pred = model.forward(session, tape.constant(sample.input), sample.label);
  auto loss = l1_loss(pred, sample.target);
  tape.backward(loss);
  return {loss.value()[0], session.gradients()};
}

SampleGradient batch_gradient(const MrIpt<float>& model, const std::vector<dataio::Sample>& batch,
                              std::size_t threads) {
  if (batch.empty()) fail(ErrorCode::kInvalidArgument, "empty batch");
  std::vector<SampleGradient> parts(batch.size());
  threads = std::max<std::size_t>(1, std::min(threads, batch.size()));
  if (threads == 1) {
    for (std::size_t i = 0; i < batch.size(); ++i) parts[i] = sample_gradient(model, batch[i]);
  } else {
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(threads);
    for (std::size_t w = 0; w < threads; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (std::size_t i = w; i < batch.size(); i += threads) {
            parts[i] = sample_gradient(model, batch[i]);
          }
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  }

  SampleGradient out;
  const float scale = 1.0f / static_cast<float>(batch.size());
  for (auto& part : parts) {
    out.loss += part.loss;
    for (auto& [name, g] : part.grads) {
      auto [it, fresh] = out.grads.try_emplace(name, std::move(g));
      if (fresh) continue;
      auto dst = it->second.data();
      auto src = g.data();
      for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
    }
  }
  out.loss /= static_cast<double>(batch.size());
  for (auto& [name, g] : out.grads)
    for (auto& x : g.data()) x *= scale;
  return out;
}

TrainResult train(MrIpt<float>& model, Adam& optimizer, const dataio::SampleStream& stream,
                  const TrainConfig& config, const std::function<void(const StepRecord&)>& on_step) {
  if (config.batch_size == 0) fail(ErrorCode::kInvalidArgument, "batch_size must be >= 1");
  if (!config.max_steps && config.epochs == 0) {
    fail(ErrorCode::kInvalidArgument, "epochs must be >= 1");
  }
  optimizer.set_lr(config.lr);
  const std::size_t total = planned_steps(config, stream);
  const std::size_t n = stream.images_per_epoch();
  TrainResult result;
  std::size_t epoch = 0, position = 0;
  while (result.steps < total) {
    std::vector<dataio::Sample> batch;
    const std::size_t end = std::min(n, position + config.batch_size);
    for (; position < end; ++position) batch.push_back(stream.at(epoch, position));
    const StepRecord record{result.steps + 1, epoch, 0.0};
    SampleGradient g = batch_gradient(model, batch, config.threads);
    if (!std::isfinite(g.loss)) {
      fail(ErrorCode::kNonFinite,
           "training loss is not finite at step " + std::to_string(record.step));
    }
    optimizer.step(model.mutable_parameters(), g.grads);
    result.trace.push_back({record.step, record.epoch, g.loss});
    ++result.steps;
    if (on_step) on_step(result.trace.back());
    if (position == n) {
      position = 0;
      ++epoch;
    }
  }
  return result;
}

std::string trace_to_csv(const std::vector<StepRecord>& trace) {
  std::ostringstream os;
  os.precision(9);
  os << "step,epoch,loss\n";
  for (const auto& r : trace) os << r.step << ',' << r.epoch << ',' << r.loss << '\n';
  return os.str();
}

}  // namespace mript::training
