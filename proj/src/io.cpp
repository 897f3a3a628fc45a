#include "fisens/io.hpp"

#include "fisens/errors.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace fisens::io {

namespace {

using nlohmann::json;

std::vector<unsigned char> read_bytes(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint32_t read_be32(const std::vector<unsigned char>& bytes, std::size_t offset, const fs::path& path) {
    if (offset + 4 > bytes.size()) throw FormatError(path.string() + ": truncated IDX header");
    return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
           (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

void put_be32(std::ofstream& out, std::uint32_t v) {
    const std::array<char, 4> b{static_cast<char>(v >> 24), static_cast<char>(v >> 16), static_cast<char>(v >> 8),
                                static_cast<char>(v)};
    out.write(b.data(), 4);
}

void check_magic(std::uint32_t got, std::uint32_t want, const fs::path& path) {
    if (got != want) {
        throw FormatError(path.string() + ": IDX magic " + std::to_string(got) + ", expected " +
                          std::to_string(want));
    }
}

std::ofstream open_for_write(const fs::path& path, std::ios::openmode mode = std::ios::out) {
    std::ofstream out(path, mode | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    return out;
}

std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t pos = line.find(sep, start);
        out.push_back(line.substr(start, pos - start));
        if (pos == std::string::npos) break;
        start = pos + 1;
    }
    return out;
}

template <typename T>
T parse_number(const std::string& field, const char* what) {
    T value{};
    const auto* end = field.data() + field.size();
    const auto [ptr, ec] = std::from_chars(field.data(), end, value);
    if (ec != std::errc() || ptr != end) throw FormatError(std::string("bad ") + what + " field '" + field + "'");
    return value;
}

std::optional<double> parse_optional(const std::string& field) {
    if (field.empty()) return std::nullopt;
    return parse_number<double>(field, "numeric");
}

}  // namespace

LabeledDataset read_idx(const fs::path& images, const fs::path& labels) {
    const auto ib = read_bytes(images);
    const auto lb = read_bytes(labels);
    check_magic(read_be32(ib, 0, images), kIdxImageMagic, images);
    check_magic(read_be32(lb, 0, labels), kIdxLabelMagic, labels);

    const std::size_t n = read_be32(ib, 4, images);
    const std::size_t rows = read_be32(ib, 8, images);
    const std::size_t cols = read_be32(ib, 12, images);
    const std::size_t n_labels = read_be32(lb, 4, labels);
    if (n != n_labels) {
        throw FormatError("image file holds " + std::to_string(n) + " samples but label file holds " +
                          std::to_string(n_labels));
    }
    const std::size_t pixels = rows * cols;
    if (ib.size() != 16 + n * pixels) throw FormatError(images.string() + ": payload size does not match header");
    if (lb.size() != 8 + n) throw FormatError(labels.string() + ": payload size does not match header");

    LabeledDataset data;
    data.shape = {rows, cols, 1};
    data.images.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        Vector img(static_cast<Eigen::Index>(pixels));
        for (std::size_t j = 0; j < pixels; ++j) img[static_cast<Eigen::Index>(j)] = ib[16 + i * pixels + j] / 255.0;
        data.images.push_back(std::move(img));
        data.labels.push_back(lb[8 + i]);
        data.ids.push_back(i);
    }
    return data;
}

void write_idx(const LabeledDataset& data, const fs::path& images, const fs::path& labels) {
    if (data.shape.channels != 1) throw ValidationError("IDX output supports single-channel images only");
    auto img = open_for_write(images, std::ios::binary);
    put_be32(img, kIdxImageMagic);
    put_be32(img, static_cast<std::uint32_t>(data.size()));
    put_be32(img, static_cast<std::uint32_t>(data.shape.height));
    put_be32(img, static_cast<std::uint32_t>(data.shape.width));
    for (const Vector& v : data.images) {
        for (Eigen::Index j = 0; j < v.size(); ++j) {
            img.put(static_cast<char>(static_cast<unsigned char>(std::lround(std::clamp(v[j], 0.0, 1.0) * 255.0))));
        }
    }
    auto lab = open_for_write(labels, std::ios::binary);
    put_be32(lab, kIdxLabelMagic);
    put_be32(lab, static_cast<std::uint32_t>(data.size()));
    for (const int y : data.labels) lab.put(static_cast<char>(static_cast<unsigned char>(y)));
    if (!img || !lab) throw IoError("failed writing IDX files");
}

LabeledDataset read_csv_dataset(const fs::path& path, const ImageShape& shape) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    LabeledDataset data;
    data.shape = shape;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto fields = split(line, ',');
        if (fields.size() != shape.size() + 1) {
            throw FormatError(path.string() + ":" + std::to_string(line_no) + ": expected " +
                              std::to_string(shape.size() + 1) + " fields, found " + std::to_string(fields.size()));
        }
        Vector img(static_cast<Eigen::Index>(shape.size()));
        for (std::size_t j = 0; j < shape.size(); ++j) {
            const int byte = parse_number<int>(fields[j + 1], "pixel");
            if (byte < 0 || byte > 255) throw FormatError(path.string() + ": pixel outside 0..255");
            img[static_cast<Eigen::Index>(j)] = byte / 255.0;
        }
        data.labels.push_back(parse_number<int>(fields[0], "label"));
        data.ids.push_back(data.images.size());
        data.images.push_back(std::move(img));
    }
    return data;
}

json model_to_json(const ClassifierModel& model) {
    json layers = json::array();
    for (const Layer& l : model.layers()) {
        layers.push_back({
            {"rows", l.weights.rows()},
            {"cols", l.weights.cols()},
            {"activation", std::string(to_string(l.activation))},
            {"weights", std::vector<double>(l.weights.data(), l.weights.data() + l.weights.size())},
            {"bias", std::vector<double>(l.bias.data(), l.bias.data() + l.bias.size())},
        });
    }
    return {
        {"format", "fisens-model"},
        {"version", kModelFormatVersion},
        {"input_dim", model.input_dim()},
        {"class_count", model.class_count()},
        {"parameter_order", "per layer: weights row-major, then bias"},
        {"layers", layers},
    };
}

ClassifierModel model_from_json(const json& doc) {
    try {
        if (doc.at("format").get<std::string>() != "fisens-model") throw FormatError("not a fisens model document");
        const int version = doc.at("version").get<int>();
        if (version != kModelFormatVersion) {
            throw FormatError("model format version " + std::to_string(version) + " is not supported; this build "
                              "reads version " + std::to_string(kModelFormatVersion) + ", re-export the model");
        }
        std::vector<Layer> layers;
        for (const json& jl : doc.at("layers")) {
            const auto rows = jl.at("rows").get<Eigen::Index>();
            const auto cols = jl.at("cols").get<Eigen::Index>();
            const auto w = jl.at("weights").get<std::vector<double>>();
            const auto b = jl.at("bias").get<std::vector<double>>();
            if (rows < 1 || cols < 1 || static_cast<Eigen::Index>(w.size()) != rows * cols ||
                static_cast<Eigen::Index>(b.size()) != rows) {
                throw FormatError("layer arrays do not match the declared shape");
            }
            Layer layer;
            layer.weights = Eigen::Map<const DenseMatrix>(w.data(), rows, cols);
            layer.bias = Eigen::Map<const Vector>(b.data(), rows);
            layer.activation = activation_from_string(jl.at("activation").get<std::string>());
            layers.push_back(std::move(layer));
        }
        ClassifierModel model(std::move(layers));
        if (model.input_dim() != doc.at("input_dim").get<std::size_t>() ||
            model.class_count() != doc.at("class_count").get<std::size_t>()) {
            throw FormatError("declared dimensions disagree with the layers");
        }
        return model;
    } catch (const json::exception& e) {
        throw FormatError(std::string("malformed model document: ") + e.what());
    }
}

void save_model(const ClassifierModel& model, const fs::path& path) {
    auto out = open_for_write(path);
    out << model_to_json(model).dump(1) << '\n';
    if (!out) throw IoError("failed writing " + path.string());
}

ClassifierModel load_model(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
    return model_from_json(doc);
}

std::string format_double(double v) {
    std::array<char, 32> buf{};
    const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return std::string(buf.data(), ptr);
}

void write_records(const std::vector<InfluenceRecord>& records, const fs::path& path) {
    if (records.empty()) throw ValidationError("write_records: nothing to write");
    auto out = open_for_write(path);
    auto opt = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string(); };
    out << kRecordHeader << '\n';
    for (const InfluenceRecord& r : records) {
        out << r.sample_id << ',' << r.target << ',' << opt(r.fi) << ',' << opt(r.jacobian_norm) << ','
            << opt(r.cook_max) << ',' << r.y_true << ',' << r.y_pred << ',' << format_double(r.p_pred) << ','
            << format_double(r.residual_ratio) << '\n';
    }
    if (!out) throw IoError("failed writing " + path.string());
}

std::vector<InfluenceRecord> read_records(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line) || line != kRecordHeader) throw FormatError(path.string() + ": unexpected header");
    std::vector<InfluenceRecord> out;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto f = split(line, ',');
        if (f.size() != 9) throw FormatError(path.string() + ": expected 9 fields per record");
        InfluenceRecord r;
        r.sample_id = parse_number<std::size_t>(f[0], "sample_id");
        r.target = f[1];
        r.fi = parse_optional(f[2]);
        r.jacobian_norm = parse_optional(f[3]);
        r.cook_max = parse_optional(f[4]);
        r.y_true = parse_number<int>(f[5], "y_true");
        r.y_pred = parse_number<int>(f[6], "y_pred");
        r.p_pred = parse_number<double>(f[7], "p_pred");
        r.residual_ratio = parse_number<double>(f[8], "residual_ratio");
        out.push_back(std::move(r));
    }
    return out;
}

void write_grid(const DenseMatrix& grid, const fs::path& path) {
    auto out = open_for_write(path);
    for (Eigen::Index r = 0; r < grid.rows(); ++r) {
        for (Eigen::Index c = 0; c < grid.cols(); ++c) out << (c ? "," : "") << format_double(grid(r, c));
        out << '\n';
    }
    if (!out) throw IoError("failed writing " + path.string());
}

void write_curve(const ScoredCurve& curve, const char* x_name, const char* y_name, const fs::path& path) {
    auto out = open_for_write(path);
    out << "threshold," << x_name << ',' << y_name << '\n';
    for (std::size_t i = 0; i < curve.x.size(); ++i) {
        out << format_double(curve.thresholds[i]) << ',' << format_double(curve.x[i]) << ','
            << format_double(curve.y[i]) << '\n';
    }
    if (!out) throw IoError("failed writing " + path.string());
}

void write_json(const nlohmann::json& doc, const fs::path& path) {
    auto out = open_for_write(path);
    out << doc.dump(2) << '\n';
    if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace fisens::io
