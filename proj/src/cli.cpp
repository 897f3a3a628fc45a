#include "fisens/cli.hpp"

#include "fisens/classifier.hpp"
#include "fisens/errors.hpp"
#include "fisens/experiments.hpp"
#include "fisens/influence.hpp"
#include "fisens/io.hpp"

#include <CLI11.hpp>
#include <json.hpp>
#include <omp.h>

#include <chrono>
#include <fstream>
#include <functional>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace fisens::cli {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

struct RunConfig {
    std::string images;
    std::string labels;
    std::string csv;
    std::string shape;  // HxWxC, only for --csv
    std::size_t limit = 0;
    std::string model;
    std::string target = "input";
    std::string objective = "true-label";
    std::string measures = "fi,jacobian";
    std::string scales = "1,3,5,7";
    std::string channel_mode = "per-channel";
    std::uint64_t seed = 0;
    std::string out = ".";
    int workers = 0;

    // train
    std::string hidden = "128,64";
    std::string activation = "sigmoid";
    std::size_t epochs = 20;
    std::size_t batch_size = 32;
    double learning_rate = 0.5;
    std::string extra_images;
    std::string extra_labels;

    // fi-dataset
    std::string test_images;
    std::string test_labels;
    std::string percentiles = "75,80,85,90,95,98,99,100";

    // fi-pixels / attack
    std::size_t index = 0;
    std::string grid_values = "0,1";
    std::string grid_offsets = "-0.5,0.5";

    // outliers
    std::size_t count = 0;
    int max_shift = 4;
    std::string outlier_images;
    std::string outlier_labels;
    std::string records;
    std::string truth;

    json to_json() const {
        return {
            {"images", images},         {"labels", labels},
            {"csv", csv},               {"shape", shape},
            {"limit", limit},           {"model", model},
            {"target", target},         {"objective", objective},
            {"measures", measures},     {"scales", scales},
            {"channel_mode", channel_mode},
            {"seed", seed},             {"out", out},
            {"workers", workers},       {"hidden", hidden},
            {"activation", activation}, {"epochs", epochs},
            {"batch_size", batch_size}, {"learning_rate", learning_rate},
            {"extra_images", extra_images}, {"extra_labels", extra_labels},
            {"test_images", test_images}, {"test_labels", test_labels},
            {"percentiles", percentiles}, {"index", index},
            {"grid_values", grid_values}, {"grid_offsets", grid_offsets},
            {"count", count},           {"max_shift", max_shift},
            {"outlier_images", outlier_images}, {"outlier_labels", outlier_labels},
            {"records", records},       {"truth", truth},
        };
    }
};

template <typename T>
std::vector<T> parse_list(const std::string& text, const char* what) {
    std::vector<T> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        std::stringstream conv(item);
        T value{};
        if (!(conv >> value) || !conv.eof()) throw ValidationError(std::string("bad ") + what + " entry '" + item + "'");
        out.push_back(value);
    }
    if (out.empty()) throw ValidationError(std::string("empty ") + what + " list");
    return out;
}

void require_file(const std::string& path, const char* flag) {
    if (path.empty()) throw ValidationError(std::string(flag) + " is required");
    if (!fs::exists(path)) throw ValidationError(std::string(flag) + " path does not exist: " + path);
}

ImageShape parse_shape(const std::string& text) {
    std::vector<std::size_t> dims;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, 'x')) dims.push_back(std::stoul(item));
    if (dims.size() == 2) dims.push_back(1);
    if (dims.size() != 3 || dims[0] == 0 || dims[1] == 0 || dims[2] == 0) {
        throw ValidationError("--shape must look like HxW or HxWxC");
    }
    return {dims[0], dims[1], dims[2]};
}

LabeledDataset truncate(LabeledDataset data, std::size_t limit) {
    if (limit == 0 || limit >= data.size()) return data;
    data.images.resize(limit);
    data.labels.resize(limit);
    data.ids.resize(limit);
    return data;
}

LabeledDataset load_dataset(const RunConfig& cfg) {
    if (!cfg.csv.empty()) {
        require_file(cfg.csv, "--csv");
        if (cfg.shape.empty()) throw ValidationError("--csv needs --shape");
        return truncate(io::read_csv_dataset(cfg.csv, parse_shape(cfg.shape)), cfg.limit);
    }
    require_file(cfg.images, "--images");
    require_file(cfg.labels, "--labels");
    return truncate(io::read_idx(cfg.images, cfg.labels), cfg.limit);
}

ClassifierModel load_model(const RunConfig& cfg) {
    require_file(cfg.model, "--model");
    return io::load_model(cfg.model);
}

PerturbationTarget parse_target(const std::string& text) {
    if (text == "input") return InputTarget{};
    if (text == "params") return AllParams{};
    if (text.rfind("layer:", 0) == 0) {
        const auto n = std::stoul(text.substr(6));
        if (n == 0) throw ValidationError("layers are numbered from 1");
        return LayerParams{n - 1};
    }
    throw ValidationError("unknown target '" + text + "' (input, params or layer:N)");
}

ObjectiveKind parse_objective(const std::string& text) {
    if (text == "true-label") return ObjectiveKind::TrueLabel;
    if (text == "pred-label") return ObjectiveKind::PredictedLabel;
    throw ValidationError("unknown objective '" + text + "' (true-label or pred-label)");
}

MeasureSet parse_measures(const std::string& text) {
    MeasureSet m{false, false, false};
    for (const std::string& name : parse_list<std::string>(text, "measure")) {
        if (name == "fi") m.fi = true;
        else if (name == "jacobian") m.jacobian = true;
        else if (name == "cook") m.cook = true;
        else throw ValidationError("unknown measure '" + name + "' (fi, jacobian, cook)");
    }
    return m;
}

ChannelMode parse_channel_mode(const std::string& text) {
    if (text == "per-channel") return ChannelMode::PerChannel;
    if (text == "averaged") return ChannelMode::Averaged;
    throw ValidationError("unknown channel mode '" + text + "' (per-channel or averaged)");
}

const Vector& sample_at(const LabeledDataset& data, std::size_t index) {
    if (index >= data.size()) {
        throw ValidationError("--index " + std::to_string(index) + " outside dataset of " +
                              std::to_string(data.size()));
    }
    return data.images[index];
}

json vector_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

class Run {
public:
    Run(std::string command, const RunConfig& cfg) : command_(std::move(command)), cfg_(cfg) {
        fs::create_directories(cfg.out);
        if (cfg.workers > 0) omp_set_num_threads(cfg.workers);
    }

    fs::path path(const std::string& name) {
        outputs_.push_back(name);
        return fs::path(cfg_.out) / name;
    }

    json& extra() { return extra_; }

    void finish(std::ostream& out) {
        const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
        json summary = {
            {"command", command_},
            {"config", cfg_.to_json()},
            {"seed", cfg_.seed},
            {"timings", {{"wall_seconds", seconds}}},
            {"outputs", outputs_},
            {"conventions",
             {{"percentiles", "nearest-rank"},
              {"tie_break", "smallest index (classes), row-major first (pixels)"},
              {"layers", "numbered from 1"},
              {"rank_tolerance", kDefaultRankTolerance}}},
        };
        if (!extra_.is_null()) summary["results"] = extra_;
        io::write_json(summary, fs::path(cfg_.out) / "summary.json");
        out << command_ << ": wrote " << outputs_.size() << " file(s) to " << cfg_.out << '\n';
    }

private:
    std::string command_;
    const RunConfig& cfg_;
    std::vector<std::string> outputs_;
    json extra_;
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

void run_train(const RunConfig& cfg, std::ostream& out) {
    LabeledDataset data = load_dataset(cfg);
    if (!cfg.extra_images.empty() || !cfg.extra_labels.empty()) {
        require_file(cfg.extra_images, "--extra-images");
        require_file(cfg.extra_labels, "--extra-labels");
        LabeledDataset extra = io::read_idx(cfg.extra_images, cfg.extra_labels);
        for (auto& id : extra.ids) id += data.size();
        data = concat(data, extra);
    }
    std::vector<std::size_t> widths{data.shape.size()};
    for (const auto w : parse_list<std::size_t>(cfg.hidden, "hidden width")) widths.push_back(w);
    int top = 0;
    for (const int y : data.labels) top = std::max(top, y);
    widths.push_back(std::max<std::size_t>(2, static_cast<std::size_t>(top) + 1));

    Run run("train", cfg);
    const ClassifierModel init = ClassifierModel::initialized(widths, activation_from_string(cfg.activation), cfg.seed);
    const TrainResult trained = train_sgd(init, data, {cfg.epochs, cfg.batch_size, cfg.learning_rate, cfg.seed});
    io::save_model(trained.model, run.path("model.json"));

    std::ofstream loss(run.path("loss.csv"));
    loss << "epoch,mean_cross_entropy\n";
    for (std::size_t e = 0; e < trained.loss_trace.size(); ++e) {
        loss << e + 1 << ',' << io::format_double(trained.loss_trace[e]) << '\n';
    }
    run.extra() = {{"training_accuracy", accuracy(trained.model, data)},
                   {"samples", data.size()},
                   {"loss_trace", trained.loss_trace}};
    run.finish(out);
}

void run_fi_sample(const RunConfig& cfg, std::ostream& out) {
    const ClassifierModel model = load_model(cfg);
    const LabeledDataset data = load_dataset(cfg);
    Run run("fi-sample", cfg);
    const auto records = score_dataset(model, data, parse_target(cfg.target), parse_objective(cfg.objective),
                                       parse_measures(cfg.measures));
    io::write_records(records, run.path("records.csv"));
    run.finish(out);
}

void run_fi_layers(const RunConfig& cfg, std::ostream& out) {
    const ClassifierModel model = load_model(cfg);
    const LabeledDataset data = load_dataset(cfg);
    Run run("fi-layers", cfg);
    io::write_records(layer_scan(model, data, parse_objective(cfg.objective)), run.path("layers.csv"));
    run.finish(out);
}

void run_fi_dataset(const RunConfig& cfg, std::ostream& out) {
    const ClassifierModel model = load_model(cfg);
    const LabeledDataset train = load_dataset(cfg);
    const auto percentiles = parse_list<double>(cfg.percentiles, "percentile");
    const MeasureSet measures = parse_measures(cfg.measures);
    if (!measures.fi) throw ValidationError("fi-dataset needs the fi measure");
    const PerturbationTarget target = parse_target(cfg.target);
    Run run("fi-dataset", cfg);

    std::ofstream table;
    auto emit = [&](const std::string& set, const LabeledDataset& data) {
        const auto records = score_dataset(model, data, target, ObjectiveKind::PredictedLabel, measures);
        io::write_records(records, run.path("records_" + set + ".csv"));
        std::vector<double> fis;
        for (const auto& r : records) fis.push_back(*r.fi);
        for (const auto& row : percentile_report(fis, percentiles)) {
            table << set << ',' << io::format_double(row.percentile) << ',' << io::format_double(row.value) << '\n';
        }
    };
    table.open(run.path("percentiles.csv"));
    table << "set,percentile,fi\n";
    emit("train", train);
    if (!cfg.test_images.empty() || !cfg.test_labels.empty()) {
        require_file(cfg.test_images, "--test-images");
        require_file(cfg.test_labels, "--test-labels");
        emit("test", truncate(io::read_idx(cfg.test_images, cfg.test_labels), cfg.limit));
    }
    run.finish(out);
}

void run_fi_pixels(const RunConfig& cfg, std::ostream& out) {
    const ClassifierModel model = load_model(cfg);
    const LabeledDataset data = load_dataset(cfg);
    const Vector& image = sample_at(data, cfg.index);
    const auto scales = parse_list<std::size_t>(cfg.scales, "scale");
    const Objective objective = cfg.objective == "true-label"
                                    ? Objective{CrossEntropyTrue{static_cast<std::size_t>(data.labels[cfg.index])}}
                                    : Objective{CrossEntropyPred{}};
    Run run("fi-pixels", cfg);
    const PixelFiMap map = pixel_fi_map(model, image, data.shape, objective, scales, parse_channel_mode(cfg.channel_mode));
    for (const auto& [k, grid] : map.by_scale) io::write_grid(grid, run.path("pixel_fi_k" + std::to_string(k) + ".csv"));
    const Vector probs = forward(model, image);
    run.extra() = {{"sample_id", data.ids[cfg.index]},
                   {"y_true", data.labels[cfg.index]},
                   {"y_pred", argmax(probs)},
                   {"probabilities", vector_json(probs)}};
    run.finish(out);
}

void run_outliers_simulate(const RunConfig& cfg, std::ostream& out) {
    const LabeledDataset train = load_dataset(cfg);
    Run run("outliers simulate", cfg);
    const OutlierSet set = simulate_outliers(train, {cfg.count, cfg.max_shift, cfg.seed}, train.size());
    io::write_idx(set.data, run.path("outliers-images-idx3-ubyte"), run.path("outliers-labels-idx1-ubyte"));
    std::ofstream prov(run.path("provenance.csv"));
    prov << "sample_id,source_a,source_b,label_a,label_b,shift_row,shift_col,label\n";
    for (std::size_t i = 0; i < set.provenance.size(); ++i) {
        const auto& p = set.provenance[i];
        prov << p.id << ',' << p.source_a << ',' << p.source_b << ',' << p.label_a << ',' << p.label_b << ','
             << p.shift_row << ',' << p.shift_col << ',' << set.data.labels[i] << '\n';
    }
    run.finish(out);
}

void run_outliers_scan(const RunConfig& cfg, std::ostream& out) {
    const ClassifierModel model = load_model(cfg);
    const LabeledDataset clean = load_dataset(cfg);
    require_file(cfg.outlier_images, "--outlier-images");
    require_file(cfg.outlier_labels, "--outlier-labels");
    LabeledDataset outliers = io::read_idx(cfg.outlier_images, cfg.outlier_labels);
    for (auto& id : outliers.ids) id += clean.size();
    const LabeledDataset all = concat(clean, outliers);

    Run run("outliers scan", cfg);
    const auto records = score_dataset(model, all, parse_target(cfg.target), parse_objective(cfg.objective),
                                       parse_measures(cfg.measures));
    io::write_records(records, run.path("records.csv"));
    std::ofstream truth(run.path("truth.csv"));
    truth << "sample_id,is_outlier\n";
    for (std::size_t i = 0; i < all.size(); ++i) truth << all.ids[i] << ',' << (i >= clean.size() ? 1 : 0) << '\n';
    run.finish(out);
}

void run_outliers_eval(const RunConfig& cfg, std::ostream& out) {
    require_file(cfg.records, "--records");
    require_file(cfg.truth, "--truth");
    const auto records = io::read_records(cfg.records);
    std::map<std::size_t, bool> truth;
    {
        std::ifstream in(cfg.truth);
        std::string line;
        std::getline(in, line);
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            const auto comma = line.find(',');
            if (comma == std::string::npos) throw FormatError("truth file lines must be sample_id,is_outlier");
            truth[std::stoul(line.substr(0, comma))] = line.substr(comma + 1) == "1";
        }
    }
    Run run("outliers eval", cfg);
    json areas = json::object();
    auto evaluate = [&](const std::string& name, auto field) {
        std::vector<double> scores;
        std::vector<bool> flags;
        for (const auto& r : records) {
            const std::optional<double> v = field(r);
            if (!v) return;
            const auto it = truth.find(r.sample_id);
            if (it == truth.end()) throw ValidationError("no truth entry for sample " + std::to_string(r.sample_id));
            scores.push_back(*v);
            flags.push_back(it->second);
        }
        const RocPr curves = roc_pr(scores, flags);
        io::write_curve(curves.roc, "fpr", "tpr", run.path("roc_" + name + ".csv"));
        io::write_curve(curves.pr, "recall", "precision", run.path("pr_" + name + ".csv"));
        areas[name] = {{"roc_auc", curves.roc.area}, {"pr_auc", curves.pr.area}};
    };
    evaluate("fi", [](const InfluenceRecord& r) { return r.fi; });
    evaluate("jacobian", [](const InfluenceRecord& r) { return r.jacobian_norm; });
    evaluate("cook", [](const InfluenceRecord& r) { return r.cook_max; });
    if (areas.empty()) throw ValidationError("records carry no measure columns to evaluate");
    run.extra() = areas;
    out << areas.dump() << '\n';
    run.finish(out);
}

void run_attack(const RunConfig& cfg, std::ostream& out) {
    const ClassifierModel model = load_model(cfg);
    const LabeledDataset data = load_dataset(cfg);
    const Vector& image = sample_at(data, cfg.index);
    ValueGrid grid;
    grid.absolute = parse_list<double>(cfg.grid_values, "grid value");
    grid.offsets = parse_list<double>(cfg.grid_offsets, "grid offset");

    Run run("attack one-pixel", cfg);
    const std::size_t unit[] = {1};
    const PixelFiMap map = pixel_fi_map(model, image, data.shape, CrossEntropyPred{}, unit, ChannelMode::Averaged);
    io::write_grid(map.by_scale.at(1), run.path("pixel_fi_k1.csv"));
    const AttackResult res = one_pixel_attack(model, image, data.shape, grid);

    DenseMatrix attacked(static_cast<Eigen::Index>(data.shape.height * data.shape.channels),
                         static_cast<Eigen::Index>(data.shape.width));
    attacked = Eigen::Map<const DenseMatrix>(res.attacked.data(), attacked.rows(), attacked.cols());
    io::write_grid(attacked, run.path("attacked_image.csv"));
    run.extra() = {
        {"sample_id", data.ids[cfg.index]},
        {"y_true", data.labels[cfg.index]},
        {"pixel", {{"row", res.row}, {"col", res.col}}},
        {"original_value", res.original_value},
        {"value", res.value},
        {"values_tried", res.tried},
        {"grid", {{"absolute", grid.absolute}, {"offsets", grid.offsets}}},
        {"y_pred_before", res.y_pred},
        {"y_pred_after", res.y_pred_after},
        {"p_pred_before", res.p_before},
        {"p_pred_after", res.p_after},
        {"probabilities_before", vector_json(res.probs_before)},
        {"probabilities_after", vector_json(res.probs_after)},
    };
    run.finish(out);
}

void add_data_flags(CLI::App* cmd, RunConfig& cfg) {
    cmd->add_option("--images", cfg.images, "IDX image file");
    cmd->add_option("--labels", cfg.labels, "IDX label file");
    cmd->add_option("--csv", cfg.csv, "CSV dataset (label,bytes...)");
    cmd->add_option("--shape", cfg.shape, "image shape HxW[xC] for --csv");
    cmd->add_option("--limit", cfg.limit, "use only the first N samples (0 = all)");
}

void add_common_flags(CLI::App* cmd, RunConfig& cfg) {
    cmd->add_option("--out", cfg.out, "output directory");
    cmd->add_option("--seed", cfg.seed, "random seed");
    cmd->add_option("--workers", cfg.workers, "OpenMP threads (0 = runtime default)");
}

}  // namespace

int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    RunConfig cfg;
    CLI::App app{"fisens: perturbation-manifold influence analysis for softmax classifiers", "fisens"};
    app.require_subcommand(1);
    std::function<void()> action;

    auto* train = app.add_subcommand("train", "train a fully-connected classifier with SGD");
    add_data_flags(train, cfg);
    add_common_flags(train, cfg);
    train->add_option("--hidden", cfg.hidden, "hidden widths, comma separated");
    train->add_option("--activation", cfg.activation, "sigmoid or relu");
    train->add_option("--epochs", cfg.epochs);
    train->add_option("--batch-size", cfg.batch_size);
    train->add_option("--lr", cfg.learning_rate, "learning rate");
    train->add_option("--extra-images", cfg.extra_images, "additional IDX images appended to the training set");
    train->add_option("--extra-labels", cfg.extra_labels);
    train->callback([&] { action = [&] { run_train(cfg, out); }; });

    auto* sample = app.add_subcommand("fi-sample", "per-sample influence (input or parameter perturbation)");
    add_data_flags(sample, cfg);
    add_common_flags(sample, cfg);
    sample->add_option("--model", cfg.model)->required();
    sample->add_option("--target", cfg.target, "input, params or layer:N");
    sample->add_option("--objective", cfg.objective, "true-label or pred-label");
    sample->add_option("--measures", cfg.measures, "fi,jacobian,cook");
    sample->callback([&] { action = [&] { run_fi_sample(cfg, out); }; });

    auto* layers = app.add_subcommand("fi-layers", "per-layer influence for every sample");
    add_data_flags(layers, cfg);
    add_common_flags(layers, cfg);
    layers->add_option("--model", cfg.model)->required();
    layers->add_option("--objective", cfg.objective, "true-label or pred-label");
    layers->callback([&] { action = [&] { run_fi_layers(cfg, out); }; });

    auto* dataset = app.add_subcommand("fi-dataset", "predicted-label influence on training and test sets");
    add_data_flags(dataset, cfg);
    add_common_flags(dataset, cfg);
    dataset->add_option("--model", cfg.model)->required();
    dataset->add_option("--target", cfg.target, "input, params or layer:N");
    dataset->add_option("--measures", cfg.measures, "fi,jacobian,cook");
    dataset->add_option("--test-images", cfg.test_images);
    dataset->add_option("--test-labels", cfg.test_labels);
    dataset->add_option("--percentiles", cfg.percentiles);
    dataset->callback([&] { action = [&] { run_fi_dataset(cfg, out); }; });

    auto* pixels = app.add_subcommand("fi-pixels", "multi-scale pixel-level influence maps for one image");
    add_data_flags(pixels, cfg);
    add_common_flags(pixels, cfg);
    pixels->add_option("--model", cfg.model)->required();
    pixels->add_option("--index", cfg.index, "sample position in the dataset");
    pixels->add_option("--scales", cfg.scales, "subset of 1,3,5,7");
    pixels->add_option("--channel-mode", cfg.channel_mode, "per-channel or averaged");
    pixels->add_option("--objective", cfg.objective, "pred-label (default here) or true-label");
    pixels->callback([&] { action = [&] { run_fi_pixels(cfg, out); }; });
    pixels->preparse_callback([&](std::size_t) { cfg.objective = "pred-label"; });

    auto* outliers = app.add_subcommand("outliers", "synthetic outlier experiment");
    outliers->require_subcommand(1);
    auto* simulate = outliers->add_subcommand("simulate", "overlap shifted digits of different classes");
    add_data_flags(simulate, cfg);
    add_common_flags(simulate, cfg);
    simulate->add_option("--count", cfg.count)->required();
    simulate->add_option("--max-shift", cfg.max_shift);
    simulate->callback([&] { action = [&] { run_outliers_simulate(cfg, out); }; });

    auto* scan = outliers->add_subcommand("scan", "score clean and outlier images");
    add_data_flags(scan, cfg);
    add_common_flags(scan, cfg);
    scan->add_option("--model", cfg.model)->required();
    scan->add_option("--outlier-images", cfg.outlier_images)->required();
    scan->add_option("--outlier-labels", cfg.outlier_labels)->required();
    scan->add_option("--target", cfg.target, "input, params or layer:N");
    scan->add_option("--objective", cfg.objective, "true-label or pred-label");
    scan->add_option("--measures", cfg.measures, "fi,jacobian,cook");
    scan->callback([&] { action = [&] { run_outliers_scan(cfg, out); }; });

    auto* eval = outliers->add_subcommand("eval", "ROC and precision-recall curves per measure");
    add_common_flags(eval, cfg);
    eval->add_option("--records", cfg.records)->required();
    eval->add_option("--truth", cfg.truth)->required();
    eval->callback([&] { action = [&] { run_outliers_eval(cfg, out); }; });

    auto* attack = app.add_subcommand("attack", "adversarial probes");
    attack->require_subcommand(1);
    auto* one_pixel = attack->add_subcommand("one-pixel", "alter the pixel with the largest pixel-wise FI");
    add_data_flags(one_pixel, cfg);
    add_common_flags(one_pixel, cfg);
    one_pixel->add_option("--model", cfg.model)->required();
    one_pixel->add_option("--index", cfg.index, "sample position in the dataset");
    one_pixel->add_option("--grid-values", cfg.grid_values, "absolute candidate values");
    one_pixel->add_option("--grid-offsets", cfg.grid_offsets, "offsets from the current value (clipped)");
    one_pixel->callback([&] { action = [&] { run_attack(cfg, out); }; });

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n" << "run with --help for usage\n";
        return 2;
    }

    try {
        if (action) action();
        return 0;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
}

}  // namespace fisens::cli
