#pragma once

#include "fisens/classifier.hpp"
#include "fisens/experiments.hpp"
#include "fisens/influence.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace fisens::io {

namespace fs = std::filesystem;

inline constexpr std::uint32_t kIdxImageMagic = 2051;  // 0x00000803
inline constexpr std::uint32_t kIdxLabelMagic = 2049;  // 0x00000801
inline constexpr int kModelFormatVersion = 1;

inline constexpr const char* kRecordHeader =
    "sample_id,target,fi,jacobian_norm,cook_max,y_true,y_pred,p_pred,residual_ratio";

/// MNIST-style IDX pair. Pixel bytes are scaled to [0,1] by 1/255; ids are the
/// positions in the file.
LabeledDataset read_idx(const fs::path& images, const fs::path& labels);
// Pixels are written as round(255 · v).
void write_idx(const LabeledDataset& data, const fs::path& images, const fs::path& labels);

/// One sample per line: `label,b0,b1,...` with pixel bytes 0–255 in the
/// planar channel order of ImageShape (CIFAR-10 binary order for RGB).
LabeledDataset read_csv_dataset(const fs::path& path, const ImageShape& shape);

nlohmann::json model_to_json(const ClassifierModel& model);
ClassifierModel model_from_json(const nlohmann::json& doc);
void save_model(const ClassifierModel& model, const fs::path& path);
ClassifierModel load_model(const fs::path& path);

// Shortest decimal text that parses back to the same double.
std::string format_double(double v);

void write_records(const std::vector<InfluenceRecord>& records, const fs::path& path);
std::vector<InfluenceRecord> read_records(const fs::path& path);

void write_grid(const DenseMatrix& grid, const fs::path& path);
void write_curve(const ScoredCurve& curve, const char* x_name, const char* y_name, const fs::path& path);
void write_json(const nlohmann::json& doc, const fs::path& path);

}  // namespace fisens::io
