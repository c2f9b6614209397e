#pragma once

#include <compare>
#include <cstddef>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "r3/core.hpp"

namespace r3 {

// Left-pads windows whose prefix is shorter than the context order.
inline constexpr Token kPadToken = -1;

/// Autoregressive next-token distribution over a fixed vocabulary. `prefix`
/// is the prompt followed by the response tokens emitted so far; `cls` names
/// the query class the prefix belongs to.
class Policy {
 public:
  virtual ~Policy() = default;
  virtual std::size_t vocab_size() const = 0;
  virtual void distribution(std::string_view cls, std::span<const Token> prefix, std::span<double> out) const = 0;
};

struct ContextKey {
  std::string cls;
  std::vector<Token> window;  // last m tokens of the prefix

  auto operator<=>(const ContextKey&) const = default;
};

/// Initial logits for contexts the table has not materialized.
class LogitPrior {
 public:
  virtual ~LogitPrior() = default;
  virtual void initial_logits(const ContextKey& key, std::span<double> out) const = 0;
};

class UniformPrior final : public LogitPrior {
 public:
  void initial_logits(const ContextKey&, std::span<double> out) const override;
};

using LogitGradient = std::map<ContextKey, std::vector<double>>;

/// Softmax policy with one logit vector per (class, last-m-tokens) context.
/// Unvisited contexts read their logits from the prior; a context is stored
/// once it has been updated. Copies are cheap snapshots sharing the prior.
class TabularPolicy final : public Policy {
 public:
  TabularPolicy(std::size_t vocab_size, std::size_t context_order, std::shared_ptr<const LogitPrior> prior = nullptr);

  std::size_t vocab_size() const override { return vocab_size_; }
  std::size_t context_order() const noexcept { return context_order_; }

  ContextKey context(std::string_view cls, std::span<const Token> prefix) const;
  std::vector<double> logits(const ContextKey& key) const;
  void probabilities(const ContextKey& key, std::span<double> out) const;
  void distribution(std::string_view cls, std::span<const Token> prefix, std::span<double> out) const override;

  void add_logits(const ContextKey& key, std::span<const double> delta);
  double& logit(const ContextKey& key, std::size_t token);

  const std::map<ContextKey, std::vector<double>>& table() const noexcept { return table_; }

  // Materialized contexts only; the prior is not serialized.
  nlohmann::json to_json() const;

 private:
  std::vector<double>& materialize(const ContextKey& key);

  std::size_t vocab_size_;
  std::size_t context_order_;
  std::shared_ptr<const LogitPrior> prior_;
  std::map<ContextKey, std::vector<double>> table_;
};

// Numerically stable softmax and log-softmax.
void softmax(std::span<const double> logits, std::span<double> out);
void log_softmax(std::span<const double> logits, std::span<double> out);

}  // namespace r3
