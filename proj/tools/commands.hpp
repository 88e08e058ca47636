#pragma once

#include "enhope/data.hpp"
#include "enhope/model_file.hpp"
#include "enhope/optimizer.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>

namespace enhope::cli {

/// A labeled dataset on disk: a CSV file, or a directory holding an IDX pair
/// named `<split>-images-idx3-ubyte[.gz]` / `<split>-labels-idx1-ubyte[.gz]`.
struct DataSource {
    std::string path;
    std::string split = "train";
    std::string label_column = "-1";  ///< header name or integer index
    bool header = false;
};

Dataset load_source(const DataSource& source);

/// Re-codes `ds` so that its class ids follow `class_names` (the training
/// coding stored in a model). Unknown label names are a data error.
Dataset align_classes(Dataset ds, const std::vector<std::string>& class_names);

struct TrainArgs {
    DataSource data;
    std::string out = "model.enhp";
    std::string report;  ///< JSON report path; empty means `<out>.report.json`
    std::string mode = "kmeans";
    std::string init = "kmeans";  ///< initializer for learned exemplars
    std::string variant = "hope";
    std::size_t z = 20;
    bool z_given = false;
    std::size_t factors = 800;
    std::size_t hidden = 400;
    int order = 2;
    std::size_t out_dim = 2;
    double val_frac = 0.1;
    std::string norm = "minmax01";
    std::string kernel = "student_t";
    std::string normalization = "global";
    std::uint64_t seed = 0;
    int epochs = 100;
    std::size_t batch_size = 5000;
    int cg_steps = 3;
    int restart = 20;
    int patience = 0;
    int k = 0;
    int kmeans_iters = 50;
    double kmeans_tol = 1e-6;
    bool quiet = false;
};

struct EmbedArgs {
    std::string model;
    DataSource data;
    std::string out = "embedding.csv";
};

struct PlotArgs {
    std::string input;
    std::string out = "embedding.svg";
    int width = 800;
    int height = 800;
    std::string title;
};

struct EvaluateArgs {
    std::string model;
    DataSource data{.split = "t10k"};
    DataSource refs;  ///< training points, required for pairwise (z = 0) models
    int k = 0;
};

struct BenchmarkArgs {
    std::string model;
    DataSource train;
    DataSource test{.split = "t10k"};
    int k = 0;
    int k_full = 5;
    int repeats = 3;
    bool parallel = false;
    std::string json;
};

int cmd_train(const TrainArgs& args, std::ostream& out);
int cmd_embed(const EmbedArgs& args, std::ostream& out);
int cmd_plot(const PlotArgs& args, std::ostream& out);
int cmd_evaluate(const EvaluateArgs& args, std::ostream& out);
int cmd_benchmark(const BenchmarkArgs& args, std::ostream& out);

/// Parses argv and runs a subcommand. Errors go to `err` as one line
/// `enhope: error[<kind>]: <message>` and yield a nonzero exit code.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

} // namespace enhope::cli
