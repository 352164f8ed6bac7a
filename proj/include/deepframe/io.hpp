#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Core>

#include <json.hpp>

#include "deepframe/coherence.hpp"
#include "deepframe/frame.hpp"
#include "deepframe/inference.hpp"
#include "deepframe/minimizer.hpp"
#include "deepframe/selection.hpp"

namespace deepframe {

// Binary matrix container: 8-byte magic "DFMAT001", uint64 rows, uint64 cols
// (little endian), then rows*cols little-endian float64 in row-major order.
inline constexpr char kMatrixMagic[] = "DFMAT001";

void write_matrix_binary(std::ostream& out, const Eigen::Ref<const Eigen::MatrixXd>& m);
void write_matrix_binary(const std::string& path, const Eigen::Ref<const Eigen::MatrixXd>& m);
Eigen::MatrixXd read_matrix_binary(std::istream& in);
Eigen::MatrixXd read_matrix_binary(const std::string& path);

// Plain comma separated rows, full round-trip precision. '#' lines are skipped on read.
void write_matrix_csv(std::ostream& out, const Eigen::Ref<const Eigen::MatrixXd>& m);
Eigen::MatrixXd read_matrix_csv(std::istream& in);
// Dispatches on the magic bytes: binary container or CSV.
Eigen::MatrixXd read_matrix(const std::string& path);

// Parameter files ("deepframe-params/1"): one entry per learned block with
// its shape and row-major values. Dense shapes are [rows, cols] of B_jj for
// diagonal blocks and of B_jk (frame block is -B_jk^T) otherwise; convolutional
// banks are [filters, channels, f, f] or [filters, channels, f].
nlohmann::json params_to_json(const FrameLayout& layout, const FrameParams& params);
FrameParams params_from_json(const FrameLayout& layout, const nlohmann::json& doc);
FrameParams load_params(const FrameLayout& layout, const std::string& path);

nlohmann::json to_json(const CoherenceReport& r);
nlohmann::json to_json(const MinResult& r, const FrameLayout& layout);
nlohmann::json to_json(const InferenceResult& r);
nlohmann::json to_json(const RankingReport& r);

std::string report_csv_header();
std::string report_csv_row(const CoherenceReport& r);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

}  // namespace deepframe
