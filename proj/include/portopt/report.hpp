#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "portopt/backtest.hpp"
#include "portopt/lstm.hpp"
#include "portopt/ppo.hpp"

namespace portopt {

// Full-precision double formatting (%.17g); round-trips exactly through stod.
std::string format_double(double v);

void write_forecast_csv(const std::filesystem::path& path, const ForecastMatrix& fm,
                        std::span<const std::string> asset_ids);
ForecastMatrix read_forecast_csv(const std::filesystem::path& path,
                                 std::vector<std::string>* asset_ids = nullptr);

void write_weights_csv(const std::filesystem::path& path, std::span<const Date> timestamps,
                       const Matrix& weights, std::span<const std::string> asset_ids);

// date,gross,turnover,active,net,reward,clamped
void write_ledger_csv(const std::filesystem::path& path, std::span<const Date> timestamps,
                      std::span<const StepRecord> records);

// update,mean_reward,policy_loss,value_loss,entropy,clip_fraction
void write_curves_csv(const std::filesystem::path& path, std::span<const CurveRow> curves);

// strategy,ann_return,volatility,sharpe,mdd (+ source column when reported
// reference rows are appended).
void write_comparison_csv(const std::filesystem::path& path,
                          std::span<const StrategyResult> results,
                          bool with_reported_rows = false);
void write_comparison_json(const std::filesystem::path& path,
                           std::span<const StrategyResult> results,
                           bool with_reported_rows = false);

void write_equity_csv(const std::filesystem::path& path, std::span<const StrategyResult> results);
void write_drawdown_csv(const std::filesystem::path& path, std::span<const StrategyResult> results);

// Static vector graphics.
void write_equity_svg(const std::filesystem::path& path, std::span<const StrategyResult> results);
void write_drawdown_svg(const std::filesystem::path& path, std::span<const StrategyResult> results);
void write_mean_weights_pie_svg(const std::filesystem::path& path, const StrategyResult& result,
                                std::span<const std::string> asset_ids);

std::string comparison_text_table(std::span<const StrategyResult> results, bool with_reported_rows);

}  // namespace portopt
