#include "r3/policy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace r3 {

void UniformPrior::initial_logits(const ContextKey&, std::span<double> out) const {
  std::fill(out.begin(), out.end(), 0.0);
}

void softmax(std::span<const double> logits, std::span<double> out) {
  const double peak = *std::max_element(logits.begin(), logits.end());
  double total = 0.0;
  for (std::size_t v = 0; v < logits.size(); ++v) {
    out[v] = std::exp(logits[v] - peak);
    total += out[v];
  }
  for (auto& q : out) q /= total;
}

void log_softmax(std::span<const double> logits, std::span<double> out) {
  const double peak = *std::max_element(logits.begin(), logits.end());
  double total = 0.0;
  for (double z : logits) total += std::exp(z - peak);
  const double log_norm = peak + std::log(total);
  for (std::size_t v = 0; v < logits.size(); ++v) out[v] = logits[v] - log_norm;
}

TabularPolicy::TabularPolicy(std::size_t vocab_size, std::size_t context_order,
                             std::shared_ptr<const LogitPrior> prior)
    : vocab_size_(vocab_size), context_order_(context_order), prior_(std::move(prior)) {
  if (vocab_size_ < 4) throw ValidationError("tabular policy needs a vocabulary of at least 4 tokens");
  if (context_order_ < 1) throw ValidationError("tabular policy needs a context order of at least 1");
  if (!prior_) prior_ = std::make_shared<UniformPrior>();
}

ContextKey TabularPolicy::context(std::string_view cls, std::span<const Token> prefix) const {
  ContextKey key{std::string(cls), std::vector<Token>(context_order_, kPadToken)};
  const std::size_t take = std::min(context_order_, prefix.size());
  std::copy(prefix.end() - static_cast<std::ptrdiff_t>(take), prefix.end(),
            key.window.end() - static_cast<std::ptrdiff_t>(take));
  return key;
}

std::vector<double> TabularPolicy::logits(const ContextKey& key) const {
  if (auto it = table_.find(key); it != table_.end()) return it->second;
  std::vector<double> out(vocab_size_, 0.0);
  prior_->initial_logits(key, out);
  return out;
}

void TabularPolicy::probabilities(const ContextKey& key, std::span<double> out) const {
  if (auto it = table_.find(key); it != table_.end()) {
    softmax(it->second, out);
    return;
  }
  std::vector<double> z(vocab_size_, 0.0);
  prior_->initial_logits(key, z);
  softmax(z, out);
}

void TabularPolicy::distribution(std::string_view cls, std::span<const Token> prefix, std::span<double> out) const {
  probabilities(context(cls, prefix), out);
}

std::vector<double>& TabularPolicy::materialize(const ContextKey& key) {
  auto it = table_.find(key);
  if (it == table_.end()) it = table_.emplace(key, logits(key)).first;
  return it->second;
}

void TabularPolicy::add_logits(const ContextKey& key, std::span<const double> delta) {
  if (delta.size() != vocab_size_) throw ValidationError("logit delta has the wrong size");
  auto& z = materialize(key);
  for (std::size_t v = 0; v < vocab_size_; ++v) z[v] += delta[v];
}

double& TabularPolicy::logit(const ContextKey& key, std::size_t token) {
  if (token >= vocab_size_) throw ValidationError("token id outside the vocabulary");
  return materialize(key)[token];
}

nlohmann::json TabularPolicy::to_json() const {
  nlohmann::json contexts = nlohmann::json::array();
  for (const auto& [key, z] : table_) {
    contexts.push_back({{"class", key.cls}, {"window", key.window}, {"logits", z}});
  }
  return {{"vocab_size", vocab_size_}, {"context_order", context_order_}, {"contexts", std::move(contexts)}};
}

}  // namespace r3
