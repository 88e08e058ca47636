#include "commands.hpp"

#include "enhope/error.hpp"
#include "enhope/knn.hpp"
#include "enhope/plot.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <charconv>
#include <cmath>
#include <map>
#include <ostream>

namespace enhope::cli {

namespace fs = std::filesystem;

namespace {

fs::path find_idx_file(const fs::path& dir, const std::string& split, const std::string& kind, const std::string& idx) {
    for (const auto& name : {split + "-" + kind + "-" + idx + "-ubyte", split + "-" + kind + "." + idx + "-ubyte"}) {
        for (const auto& suffix : {"", ".gz"}) {
            fs::path p = dir / (name + suffix);
            if (fs::exists(p)) return p;
        }
    }
    throw Error(ErrorKind::io, "no " + split + "-" + kind + "-" + idx + "-ubyte[.gz] in " + dir.string());
}

CsvOptions csv_options(const DataSource& source) {
    CsvOptions opts;
    opts.has_header = source.header;
    const auto& col = source.label_column;
    int index = 0;
    auto [ptr, ec] = std::from_chars(col.data(), col.data() + col.size(), index);
    if (ec == std::errc() && ptr == col.data() + col.size()) {
        opts.label_column = index;
    } else {
        if (!source.header) throw Error(ErrorKind::config, "label column '" + col + "' given by name needs --header");
        opts.label_column = col;
    }
    return opts;
}

ExemplarMode resolve_mode(const std::string& mode, const std::string& init) {
    if (init != "kmeans" && init != "random") throw Error(ErrorKind::config, "--init must be kmeans or random");
    if (mode == "learned") return init == "random" ? ExemplarMode::learned_init_random : ExemplarMode::learned_init_kmeans;
    if (mode == "none" || mode == "kmeans" || mode == "random") return parse_exemplar_mode(mode);
    throw Error(ErrorKind::config, "--mode must be one of kmeans, learned, random, none (got '" + mode + "')");
}

Matrix embed_exemplars(const ModelFile& file) {
    if (file.exemplars.size() == 0) return Matrix(0, static_cast<Eigen::Index>(file.model.output_dim()));
    return forward(file.model, file.exemplars.vectors);
}

void check_dims(const ModelFile& file, const Dataset& ds, const std::string& what) {
    if (ds.feature_dim() != file.model.input_dim()) {
        throw Error(ErrorKind::dimension, what + " has " + std::to_string(ds.feature_dim()) + " features, model expects " +
                                              std::to_string(file.model.input_dim()));
    }
}

// Error output must stay on one line for scripts that parse it.
std::string one_line(std::string text) {
    for (auto& ch : text) {
        if (ch == '\n' || ch == '\r') ch = ' ';
    }
    return text;
}

nlohmann::json number_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

} // namespace

Dataset load_source(const DataSource& source) {
    if (source.path.empty()) throw Error(ErrorKind::config, "no data path given");
    const fs::path path(source.path);
    if (!fs::exists(path)) throw Error(ErrorKind::io, "no such file or directory: " + source.path);
    Dataset ds;
    if (fs::is_directory(path)) {
        ds = load_idx(find_idx_file(path, source.split, "images", "idx3"), find_idx_file(path, source.split, "labels", "idx1"));
    } else {
        ds = load_csv(path, csv_options(source));
    }
    ds.validate();
    return ds;
}

Dataset align_classes(Dataset ds, const std::vector<std::string>& class_names) {
    std::map<std::string, int> id;
    for (std::size_t c = 0; c < class_names.size(); ++c) id.emplace(class_names[c], static_cast<int>(c));
    std::vector<int> remap(ds.class_names.size(), -1);
    for (std::size_t c = 0; c < ds.class_names.size(); ++c) {
        auto it = id.find(ds.class_names[c]);
        if (it != id.end()) remap[c] = it->second;
    }
    for (auto& label : ds.labels) {
        const int mapped = remap[static_cast<std::size_t>(label)];
        if (mapped < 0) {
            throw Error(ErrorKind::data, "label '" + ds.class_names[static_cast<std::size_t>(label)] +
                                             "' does not occur in the model's training classes");
        }
        label = mapped;
    }
    ds.class_names = class_names;
    ds.class_count = static_cast<int>(class_names.size());
    return ds;
}

int cmd_train(const TrainArgs& args, std::ostream& out) {
    const ExemplarMode mode = resolve_mode(args.mode, args.init);
    std::size_t z = args.z;
    if (mode == ExemplarMode::none) {
        if (args.z_given && args.z > 0) throw Error(ErrorKind::config, "--z needs an exemplar mode other than none");
        z = 0;
    } else if (z == 0) {
        throw Error(ErrorKind::config, "--z must be positive with exemplar mode " + args.mode);
    }
    if (args.variant != "hope" && args.variant != "linear") throw Error(ErrorKind::config, "--model must be hope or linear");
    if (!(args.val_frac >= 0.0 && args.val_frac < 1.0)) throw Error(ErrorKind::config, "--val-frac must lie in [0, 1)");

    const Dataset raw = load_source(args.data);
    auto [ds, stats] = normalize(raw, parse_norm_mode(args.norm));

    Split split;
    if (args.val_frac > 0.0) {
        split = stratified_split(ds, args.val_frac, args.seed);
    } else {
        split.train.resize(ds.size());
        for (std::size_t i = 0; i < ds.size(); ++i) split.train[i] = i;
    }

    // Independent streams for initialization, exemplars and batching.
    const std::uint64_t model_seed = args.seed;
    const std::uint64_t exemplar_seed = args.seed + 0x9e3779b97f4a7c15ULL;
    const std::uint64_t batch_seed = args.seed + 2 * 0x9e3779b97f4a7c15ULL;

    EmbeddingModel model = args.variant == "hope"
                               ? init_high_order({raw.feature_dim(), args.out_dim, args.factors, args.hidden}, args.order,
                                                 model_seed)
                               : init_linear(raw.feature_dim(), args.out_dim, model_seed);
    model.norm = stats;
    model.validate();

    ExemplarSet exemplars;
    if (mode != ExemplarMode::none) {
        ExemplarConfig ec;
        ec.z = z;
        ec.mode = mode;
        ec.seed = exemplar_seed;
        ec.kmeans_max_iters = args.kmeans_iters;
        ec.kmeans_tolerance = args.kmeans_tol;
        exemplars = make_exemplars(ds.subset(split.train), ec);
    }

    TrainOptions options;
    options.mode = mode == ExemplarMode::none ? LossMode::pairwise : LossMode::exemplar;
    options.learn_exemplars = is_learned(mode);
    if (args.kernel == "student_t") {
        options.kernel = PairKernel::student_t;
    } else if (args.kernel == "gaussian") {
        options.kernel = PairKernel::gaussian;
    } else {
        throw Error(ErrorKind::config, "--kernel must be student_t or gaussian");
    }
    if (args.normalization == "global") {
        options.normalization = ExemplarNormalization::global;
    } else if (args.normalization == "per_row") {
        options.normalization = ExemplarNormalization::per_row;
    } else {
        throw Error(ErrorKind::config, "--normalization must be global or per_row");
    }

    CgConfig cfg;
    cfg.max_epochs = args.epochs;
    cfg.batch_size = args.batch_size;
    cfg.cg_steps_per_batch = args.cg_steps;
    cfg.restart_interval = args.restart;
    cfg.patience = args.patience;
    cfg.k = args.k;
    cfg.seed = batch_seed;
    cfg.log = args.quiet ? nullptr : &out;

    TrainResult result = train(model, ds, split, exemplars, options, cfg);

    ModelFile file;
    file.model = std::move(result.model);
    file.exemplars = std::move(result.exemplars);
    file.class_count = ds.class_count;
    file.class_names = ds.class_names;
    file.seed = args.seed;
    file.epochs = static_cast<std::uint32_t>(result.report.epochs.size());
    file.selected_epoch = static_cast<std::uint32_t>(result.report.selected_epoch);
    file.exemplar_mode = mode;
    const int k = args.k > 0 ? args.k : default_k(z);
    if (result.report.selected_epoch > 0) {
        file.final_val_error = result.report.epochs[static_cast<std::size_t>(result.report.selected_epoch - 1)].val_error;
    } else {
        const ExemplarSet refs = z > 0 ? file.exemplars
                                       : ExemplarSet{gather_rows(ds.features, split.train), gather_labels(ds.labels, split.train)};
        file.final_val_error = evaluate_validation(file.model, refs, gather_rows(ds.features, split.validation),
                                                   gather_labels(ds.labels, split.validation), k);
    }
    save_model(file, args.out);

    nlohmann::json report = {
        {"model", args.out},
        {"mode", to_string(mode)},
        {"variant", args.variant},
        {"z", z},
        {"F", args.factors},
        {"m", args.hidden},
        {"O", args.order},
        {"h", args.out_dim},
        {"k", k},
        {"seed", args.seed},
        {"n_train", split.train.size()},
        {"n_validation", split.validation.size()},
        {"batches_per_epoch", result.report.batches_per_epoch},
        {"steps", result.report.steps},
        {"fallback_steps", result.report.fallback_steps},
        {"selected_epoch", result.report.selected_epoch},
        {"final_val_error", number_or_null(file.final_val_error)},
    };
    auto& epochs = report["epochs"] = nlohmann::json::array();
    for (const auto& e : result.report.epochs) {
        epochs.push_back({{"epoch", e.epoch}, {"loss", number_or_null(e.loss)}, {"val_error", number_or_null(e.val_error)},
                          {"seconds", e.seconds}});
    }
    write_text_file(args.report.empty() ? args.out + ".report.json" : args.report, report.dump(2) + "\n");

    out << "model=" << args.out << " z=" << z << " epochs=" << file.epochs << " selected_epoch=" << file.selected_epoch
        << " val_err=" << file.final_val_error << "\n";
    return 0;
}

int cmd_embed(const EmbedArgs& args, std::ostream& out) {
    const ModelFile file = load_model(args.model);
    const Dataset ds = align_classes(load_source(args.data), file.class_names);
    check_dims(file, ds, "data");
    const Matrix Y = forward(file.model, file.model.norm.apply(ds.features));
    const std::string csv = format_embedding_csv(Y, ds.labels, embed_exemplars(file), file.exemplars.labels, file.class_names);
    write_text_file(args.out, csv);
    out << "rows=" << ds.size() << " exemplars=" << file.exemplars.size() << " out=" << args.out << "\n";
    return 0;
}

int cmd_plot(const PlotArgs& args, std::ostream& out) {
    const EmbeddingTable table = read_embedding_csv(args.input);
    PlotOptions options;
    options.width = args.width;
    options.height = args.height;
    options.title = args.title;
    write_text_file(args.out, render_svg(table, options));
    out << "points=" << table.size() << " out=" << args.out << "\n";
    return 0;
}

int cmd_evaluate(const EvaluateArgs& args, std::ostream& out) {
    const ModelFile file = load_model(args.model);
    const Dataset test = align_classes(load_source(args.data), file.class_names);
    check_dims(file, test, "test data");

    ExemplarSet references = file.exemplars;
    if (references.size() == 0) {
        if (args.refs.path.empty()) throw Error(ErrorKind::config, "a pairwise model (z = 0) needs --refs training data");
        const Dataset refs = align_classes(load_source(args.refs), file.class_names);
        check_dims(file, refs, "reference data");
        references = ExemplarSet{file.model.norm.apply(refs.features), refs.labels};
    }
    const int k = args.k > 0 ? args.k : default_k(file.exemplars.size());
    const auto result = classify_embedded(file.model, references, file.model.norm.apply(test.features), test.labels, k);
    out << "error=" << result.error << " k=" << k << " n=" << test.size() << " z=" << file.exemplars.size() << "\n";
    return 0;
}

int cmd_benchmark(const BenchmarkArgs& args, std::ostream& out) {
    const ModelFile file = load_model(args.model);
    const Dataset train = align_classes(load_source(args.train), file.class_names);
    const Dataset test = align_classes(load_source(args.test), file.class_names);
    check_dims(file, train, "training data");
    check_dims(file, test, "test data");
    BenchmarkOptions options;
    options.k_full = args.k_full;
    options.k_exemplar = args.k;
    options.repeats = args.repeats;
    options.parallel = args.parallel;
    const auto report = benchmark(file.model, file.exemplars, train, test, options);
    out << report.to_key_value();
    if (!args.json.empty()) write_text_file(args.json, report.to_json());
    return 0;
}

namespace {

void add_source(CLI::App* app, DataSource& source, const std::string& flag, const std::string& what, bool required) {
    auto* opt = app->add_option(flag, source.path, what + ": CSV file or IDX directory");
    if (required) opt->required();
    app->add_option(flag + "-split", source.split, "IDX file prefix inside the directory")->capture_default_str();
    app->add_option(flag + "-label-column", source.label_column, "CSV label column (name or index, -1 = last)")
        ->capture_default_str();
    app->add_flag(flag + "-header", source.header, "CSV has a header row");
}

} // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"enhope: exemplar-centered high-order parametric embedding"};
    app.require_subcommand(1);

    TrainArgs train_args;
    auto* train = app.add_subcommand("train", "train a model");
    add_source(train, train_args.data, "--data", "training data", true);
    train->add_option("-o,--out", train_args.out, "model file to write")->capture_default_str();
    train->add_option("--report", train_args.report, "JSON report path (default <out>.report.json)");
    train->add_option("--mode", train_args.mode, "exemplars: kmeans, learned, random or none")->capture_default_str();
    train->add_option("--init", train_args.init, "initializer for learned exemplars: kmeans or random")
        ->capture_default_str();
    train->add_option("--model", train_args.variant, "hope or linear")->capture_default_str();
    auto* z_opt = train->add_option("-z,--z", train_args.z, "number of exemplars")->capture_default_str();
    train->add_option("-F,--factors", train_args.factors, "factor count F")->capture_default_str();
    train->add_option("-m,--hidden", train_args.hidden, "hidden units m")->capture_default_str();
    train->add_option("-O,--order", train_args.order, "interaction order O")->capture_default_str();
    train->add_option("--dim", train_args.out_dim, "embedding dimension h")->capture_default_str();
    train->add_option("--val-frac", train_args.val_frac, "validation fraction per class")->capture_default_str();
    train->add_option("--norm", train_args.norm, "input normalization: none, minmax01, zscore")->capture_default_str();
    train->add_option("--kernel", train_args.kernel, "pairwise kernel: student_t or gaussian")->capture_default_str();
    train->add_option("--normalization", train_args.normalization, "exemplar probabilities: global or per_row")
        ->capture_default_str();
    train->add_option("--seed", train_args.seed, "random seed")->capture_default_str();
    train->add_option("--epochs", train_args.epochs, "maximum epochs")->capture_default_str();
    train->add_option("--batch-size", train_args.batch_size, "mini-batch size")->capture_default_str();
    train->add_option("--cg-steps", train_args.cg_steps, "CG steps per batch")->capture_default_str();
    train->add_option("--restart", train_args.restart, "CG restart interval")->capture_default_str();
    train->add_option("--patience", train_args.patience, "early-stopping patience (0 = off)")->capture_default_str();
    train->add_option("-k,--k", train_args.k, "validation kNN k (0 = automatic)")->capture_default_str();
    train->add_option("--kmeans-iters", train_args.kmeans_iters, "k-means iteration cap")->capture_default_str();
    train->add_option("--kmeans-tol", train_args.kmeans_tol, "k-means relative inertia tolerance")->capture_default_str();
    train->add_flag("-q,--quiet", train_args.quiet, "suppress per-epoch progress lines");

    EmbedArgs embed_args;
    auto* embed = app.add_subcommand("embed", "write the embedding of a dataset as CSV");
    embed->add_option("--model", embed_args.model, "model file")->required();
    add_source(embed, embed_args.data, "--data", "data to embed", true);
    embed->add_option("-o,--out", embed_args.out, "CSV to write")->capture_default_str();

    PlotArgs plot_args;
    auto* plot = app.add_subcommand("plot", "render an embedding CSV as SVG");
    plot->add_option("-i,--input", plot_args.input, "embedding CSV")->required();
    plot->add_option("-o,--out", plot_args.out, "SVG to write")->capture_default_str();
    plot->add_option("--width", plot_args.width)->capture_default_str();
    plot->add_option("--height", plot_args.height)->capture_default_str();
    plot->add_option("--title", plot_args.title);

    EvaluateArgs eval_args;
    auto* evaluate = app.add_subcommand("evaluate", "kNN error of a model on a test set");
    evaluate->add_option("--model", eval_args.model, "model file")->required();
    add_source(evaluate, eval_args.data, "--data", "test data", true);
    add_source(evaluate, eval_args.refs, "--refs", "reference points for pairwise models", false);
    evaluate->add_option("-k,--k", eval_args.k, "neighbors (0 = automatic from z)")->capture_default_str();

    BenchmarkArgs bench_args;
    auto* bench = app.add_subcommand("benchmark", "exemplar kNN against full brute-force kNN");
    bench->add_option("--model", bench_args.model, "model file")->required();
    add_source(bench, bench_args.train, "--train", "training data (full kNN references)", true);
    add_source(bench, bench_args.test, "--test", "test data", true);
    bench->add_option("-k,--k", bench_args.k, "exemplar kNN k (0 = automatic from z)")->capture_default_str();
    bench->add_option("--k-full", bench_args.k_full, "full kNN k")->capture_default_str();
    bench->add_option("--repeats", bench_args.repeats, "timed repeats (>= 3)")->capture_default_str();
    bench->add_flag("--parallel", bench_args.parallel, "use the OpenMP kernels for both arms");
    bench->add_option("--json", bench_args.json, "also write the report as JSON");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "enhope: error[usage]: " << one_line(e.what()) << "\n";
        return 2;
    }

    try {
        if (*train) {
            train_args.z_given = z_opt->count() > 0;
            return cmd_train(train_args, out);
        }
        if (*embed) return cmd_embed(embed_args, out);
        if (*plot) return cmd_plot(plot_args, out);
        if (*evaluate) return cmd_evaluate(eval_args, out);
        if (*bench) return cmd_benchmark(bench_args, out);
    } catch (const Error& e) {
        err << "enhope: error[" << to_string(e.kind()) << "]: " << one_line(e.what()) << "\n";
        return 1;
    } catch (const std::exception& e) {
        err << "enhope: error[internal]: " << one_line(e.what()) << "\n";
        return 1;
    }
    return 2;
}

} // namespace enhope::cli
