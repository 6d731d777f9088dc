#include "plastinet/cl_runner.hpp"

#include <chrono>

#include "plastinet/csv.hpp"
#include "plastinet/error.hpp"

namespace plastinet {

void write_cl_log_csv(const CLRunLog& log, const std::string& path) {
    CsvWriter w(path, {"global_step", "chunk", "train_accuracy", "loss", "active_params",
                       "wall_ms"});
    for (const auto& r : log.rows) {
        w.write_row({CsvWriter::field(r.global_step), CsvWriter::field(r.chunk),
                     CsvWriter::field(r.train_accuracy), CsvWriter::field(r.loss),
                     CsvWriter::field(r.active_params), CsvWriter::field(r.wall_ms)});
    }
}

Tensor CLModel::forward(Graph& g, const Tensor& images) const {
    Tensor h = images;
    for (const auto& conv : convs) {
        h = conv.forward(g, h);
        h = g.relu(h);
        h = g.maxpool2(h);
    }
    h = g.reshape(h, {h.dim(0), flat_dim});
    h = g.relu(adapter.forward(g, h));
    h = site.forward(g, h);
    h = g.relu(h);
    return head.forward(g, h);
}

CLModel build_cl_model(const CLConfig& cfg, const ChunkedDataset& ds) {
    CLModel model;
    model.schedule = solve_method_dims(cfg.method, cfg.site_width, cfg.budget,
                                       static_cast<int>(ds.chunk_count()), cfg.granularity);
    Rng init_rng = Rng(cfg.seed).split(1);

    std::int64_t c = ds.cfg.channels;
    std::int64_t hw = ds.cfg.height;
    if (ds.cfg.height != ds.cfg.width) throw ConfigError("cl model: images must be square");
    const int pad = cfg.kernel / 2;
    for (std::size_t i = 0; i < cfg.conv_widths.size(); ++i) {
        model.convs.emplace_back(model.params, "conv" + std::to_string(i), c, cfg.conv_widths[i],
                                 cfg.kernel, 1, pad, init_rng);
        c = cfg.conv_widths[i];
        if (hw % 2 != 0) throw ConfigError("cl model: image side not divisible by pooling");
        hw /= 2;
    }
    model.flat_dim = c * hw * hw;
    model.adapter =
        LinearLayer(model.params, "adapter", model.flat_dim, cfg.site_width, true, init_rng);
    model.site = build_site(model.params, "site", model.schedule, init_rng);
    model.head =
        LinearLayer(model.params, "head", cfg.site_width, ds.num_classes(), true, init_rng);
    return model;
}

namespace {

// Fixed seeded evaluation subsample (with replacement) of chunks 0..chunk.
void draw_eval_sample(const ChunkedDataset& ds, std::int64_t chunk, std::int64_t size,
                      std::uint64_t run_seed, Tensor* images, std::vector<std::int64_t>* labels) {
    const Rng derived = Rng(run_seed).split(1000 + static_cast<std::uint64_t>(chunk));
    StreamCursor cursor(chunk, derived.seed());
    cumulative_batch(ds, cursor, size, images, labels);
}

struct EvalResult {
    double accuracy = 0.0;
    double loss = 0.0;
};

// Forward in slices to bound tape memory; loss is mean NLL computed directly
// from the logits.
EvalResult evaluate(const CLModel& model, const Tensor& images,
                    const std::vector<std::int64_t>& labels) {
    const std::int64_t n = images.dim(0);
    const std::int64_t pix = images.numel() / n;
    const std::int64_t slice = 256;
    double nll = 0.0;
    std::int64_t correct = 0;
    for (std::int64_t lo = 0; lo < n; lo += slice) {
        const std::int64_t hi = std::min(n, lo + slice);
        const std::int64_t m = hi - lo;
        Tensor batch = Tensor::zeros({m, images.dim(1), images.dim(2), images.dim(3)});
        std::copy(images.data().begin() + lo * pix, images.data().begin() + hi * pix,
                  batch.data().begin());
        Graph g;
        Tensor logits = model.forward(g, batch);
        const std::int64_t classes = logits.dim(1);
        const auto& lv = logits.data();
        for (std::int64_t i = 0; i < m; ++i) {
            const double* row = lv.data() + i * classes;
            double mx = row[0];
            std::int64_t best = 0;
            for (std::int64_t j = 1; j < classes; ++j) {
                if (row[j] > mx) {
                    mx = row[j];
                    best = j;
                }
            }
            double z = 0.0;
            for (std::int64_t j = 0; j < classes; ++j) z += std::exp(row[j] - mx);
            const std::int64_t y = labels[static_cast<std::size_t>(lo + i)];
            nll += -(row[y] - mx - std::log(z));
            if (best == y) ++correct;
        }
    }
    EvalResult r;
    r.accuracy = static_cast<double>(correct) / static_cast<double>(n);
    r.loss = nll / static_cast<double>(n);
    return r;
}

} // namespace

double eval_train_accuracy(const CLModel& model, const Tensor& images,
                           const std::vector<std::int64_t>& labels) {
    Graph g;
    Tensor logits = model.forward(g, images);
    return accuracy_from_logits(logits, labels);
}

CLRunLog run_cl(const CLConfig& cfg) {
    const ChunkedDataset ds =
        cfg.dataset_path.empty() ? gen_synthetic_chunks(cfg.data) : load_dataset(cfg.dataset_path);
    if (cfg.steps_per_chunk < 1 || cfg.eval_every < 1 ||
        cfg.steps_per_chunk % cfg.eval_every != 0) {
        throw ConfigError("run_cl: eval_every must divide steps_per_chunk");
    }

    CLModel model = build_cl_model(cfg, ds);
    Rng master(cfg.seed);
    StreamCursor cursor(0, master.split(2).seed());

    CLRunLog log;
    const auto t0 = std::chrono::steady_clock::now();
    auto wall_ms = [&]() {
        return std::chrono::duration_cast<std::chrono::milliseconds>(
                   std::chrono::steady_clock::now() - t0)
            .count();
    };

    const std::int64_t chunks = ds.chunk_count();
    const std::int64_t eval_size = std::min(cfg.eval_sample, chunks * ds.samples_per_chunk());

    Tensor eval_images;
    std::vector<std::int64_t> eval_labels;
    auto log_eval = [&](std::int64_t global_step, std::int64_t chunk) {
        const EvalResult r = evaluate(model, eval_images, eval_labels);
        log.rows.push_back(CLRunRow{global_step, chunk, r.accuracy, r.loss,
                                    model.active_params(), wall_ms()});
    };

    for (std::int64_t chunk = 0; chunk < chunks; ++chunk) {
        if (chunk > 0) {
            Rng grow_rng = master.split(100 + static_cast<std::uint64_t>(chunk));
            apply_expansion(model.site, model.params, model.schedule, static_cast<int>(chunk),
                            grow_rng);
        }
        cursor.chunk = chunk;
        draw_eval_sample(ds, chunk, eval_size, cfg.seed, &eval_images, &eval_labels);

        for (std::int64_t step = 0; step < cfg.steps_per_chunk; ++step) {
            const std::int64_t global_step = chunk * cfg.steps_per_chunk + step;
            if (step % cfg.eval_every == 0) log_eval(global_step, chunk);

            Tensor images;
            std::vector<std::int64_t> labels;
            cumulative_batch(ds, cursor, cfg.batch_size, &images, &labels);
            Graph g;
            Tensor logits = model.forward(g, images);
            Tensor loss = cross_entropy(g, logits, labels);
            g.backward(loss);
            adam_step(model.params, cfg.adam);
        }
    }
    log_eval(chunks * cfg.steps_per_chunk, chunks - 1);
    return log;
}

} // namespace plastinet
