#pragma once

#include <string>
#include <vector>

#include "plastinet/budget.hpp"
#include "plastinet/dataset.hpp"
#include "plastinet/layers.hpp"

namespace plastinet {

struct CLConfig {
    DatasetConfig data;
    std::string dataset_path; // when set, load instead of generating

    MethodTag method = MethodTag::none;
    std::int64_t granularity = 1;
    std::int64_t budget = 25600;    // expansion-site weight budget
    std::int64_t site_width = 64;   // d

    std::vector<std::int64_t> conv_widths = {16, 16, 32};
    int kernel = 3;

    std::int64_t steps_per_chunk = 2000;
    std::int64_t batch_size = 64;
    std::int64_t eval_every = 200;
    std::int64_t eval_sample = 2048;

    AdamConfig adam;
    std::uint64_t seed = 1;
};

struct CLRunRow {
    std::int64_t global_step = 0;
    std::int64_t chunk = 0;
    double train_accuracy = 0.0;
    double loss = 0.0;
    std::int64_t active_params = 0;
    std::int64_t wall_ms = 0;
};

struct CLRunLog {
    std::vector<CLRunRow> rows;
};

/// Header: global_step,chunk,train_accuracy,loss,active_params,wall_ms
void write_cl_log_csv(const CLRunLog& log, const std::string& path);

/// Conv feature stack, adapter into the expansion site, and classifier head.
/// The site is the only part a method reshapes; adapter and head shapes are
/// identical across methods, so site-budget parity is model parity.
struct CLModel {
    ParamStore params;
    std::vector<ConvLayer> convs;
    std::int64_t flat_dim = 0;
    LinearLayer adapter;
    ExpansionSite site;
    LinearLayer head;
    GrowthSchedule schedule;

    Tensor forward(Graph& g, const Tensor& images) const;
    std::int64_t active_params() const { return site_weight_params(site, params); }
};

CLModel build_cl_model(const CLConfig& cfg, const ChunkedDataset& ds);

/// Argmax accuracy of the model on the given images; ties break toward the
/// lowest class index.
double eval_train_accuracy(const CLModel& model, const Tensor& images,
                           const std::vector<std::int64_t>& labels);

/// Runs the chunk-stream protocol: expansion at the start of every chunk
/// after the first, cumulative sampling, periodic evaluation on a fixed
/// seeded subsample. Deterministic given the config.
CLRunLog run_cl(const CLConfig& cfg);

} // namespace plastinet
