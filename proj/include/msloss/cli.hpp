#pragma once

// Command implementations behind the msloss executable. Each command returns
// its output document and an exit status instead of writing files, so tests
// can drive them directly.
//
// Output documents are plain text:
//
//     # msloss <command>
//     key = value              (effective config first, then results)
//     [section]
//     col,col,...              (comma-delimited table rows)

#include "msloss/config.hpp"
#include "msloss/core.hpp"
#include "msloss/eval.hpp"
#include "msloss/gpw.hpp"
#include "msloss/gradcheck.hpp"
#include "msloss/losses.hpp"
#include "msloss/trainer.hpp"

#include <algorithm>
#include <cstdio>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace msloss {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitVerification = 2;

class Document {
public:
    explicit Document(std::string command) : command_(std::move(command)) {}

    void set(std::string key, std::string value) { entries_.emplace_back(std::move(key), std::move(value)); }

    void echo_config(const RunConfig& config) {
        for (auto& [key, value] : effective_config(config))
            set("config." + key, value);
    }

    /// Starts a table; following rows belong to it.
    void table(std::string name, std::string header) {
        tables_.push_back({std::move(name), std::move(header), {}});
    }
    void row(std::string line) { tables_.back().rows.push_back(std::move(line)); }

    std::string render() const {
        std::ostringstream out;
        out << "# msloss " << command_ << '\n';
        for (const auto& [key, value] : entries_)
            out << key << " = " << value << '\n';
        for (const auto& t : tables_) {
            out << '\n' << '[' << t.name << "]\n" << t.header << '\n';
            for (const auto& r : t.rows)
                out << r << '\n';
        }
        return out.str();
    }

private:
    struct Table {
        std::string name;
        std::string header;
        std::vector<std::string> rows;
    };
    std::string command_;
    std::vector<std::pair<std::string, std::string>> entries_;
    std::vector<Table> tables_;
};

struct CommandResult {
    int exit_code = kExitOk;
    std::string document;
};

inline std::string fmt(const char* spec, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, spec, v);
    return buf;
}

// ---------------------------------------------------------------------------
// Data

struct PreparedData {
    FeatureMatrix train_x;
    Labels train_y;
    EvalSplit held_out;
};

inline PreparedData prepare_data(const RunConfig& config) {
    if (config.source == DataSource::synthetic) {
        const Dataset data = synth_dataset(config.synth);
        return {select_rows(data.x, data.train), select_labels(data.y, data.train),
                {select_rows(data.x, data.test), select_labels(data.y, data.test), {}, {}}};
    }
    Dataset data = load_dataset(config.data_path);
    PreparedData out;
    if (!config.query_path.empty()) {
        const Dataset q = load_dataset(config.query_path);
        const Dataset g = load_dataset(config.gallery_path);
        out.train_x = data.x;
        out.train_y = data.y;
        out.held_out = {q.x, q.y, g.x, g.y};
    } else if (!config.test_path.empty()) {
        const Dataset t = load_dataset(config.test_path);
        out.train_x = data.x;
        out.train_y = data.y;
        out.held_out = {t.x, t.y, {}, {}};
    } else {
        split_half_per_class(data);
        out.train_x = select_rows(data.x, data.train);
        out.train_y = select_labels(data.y, data.train);
        out.held_out = {select_rows(data.x, data.test), select_labels(data.y, data.test), {}, {}};
    }
    return out;
}

// ---------------------------------------------------------------------------
// train

inline void append_train_result(Document& doc, const RunConfig& config, const TrainResult& result) {
    doc.set("result.held_out_queries", std::to_string(result.final.queries));
    doc.set("result.excluded_queries", std::to_string(result.final.excluded));
    for (std::size_t r = 0; r < result.final.ks.size(); ++r)
        doc.set("result.recall_at_" + std::to_string(result.final.ks[r]),
                fmt("%.6f", result.final.recall[r]));

    doc.table("history", config.output_timing ? "epoch,loss_mean,recall_at_1,wall_seconds"
                                              : "epoch,loss_mean,recall_at_1");
    for (std::size_t e = 0; e < result.history.epochs.size(); ++e) {
        const auto& rec = result.history.epochs[e];
        std::string line = std::to_string(e + 1) + ',' + fmt("%.9g", rec.loss_mean) + ',' +
                           fmt("%.6f", rec.recall_at_1);
        if (config.output_timing)
            line += ',' + fmt("%.4f", rec.wall_seconds);
        doc.row(std::move(line));
    }

    doc.table("recall", "k,initial,final");
    for (std::size_t r = 0; r < result.final.ks.size(); ++r)
        doc.row(std::to_string(result.final.ks[r]) + ',' + fmt("%.6f", result.initial.recall[r]) + ',' +
                fmt("%.6f", result.final.recall[r]));
}

inline CommandResult cmd_train(const RunConfig& config) {
    validate(config);
    const PreparedData data = prepare_data(config);
    const TrainResult result = train(config.train, data.train_x, data.train_y, data.held_out);
    Document doc("train");
    doc.echo_config(config);
    append_train_result(doc, config, result);
    return {kExitOk, doc.render()};
}

// ---------------------------------------------------------------------------
// gradcheck

struct GradcheckRow {
    Method method;
    bool skipped = false;
    double loss_level = 0.0;
    double end_to_end = 0.0;
};

inline std::vector<GradcheckRow> run_gradcheck(const RunConfig& config) {
    const HyperParams& hp = config.train.hp;
    std::vector<GradcheckRow> rows;
    for (Method method : kAllMethods) {
        GradcheckRow row{method};
        const MethodLoss base(method);
        if (!base.has_value()) {
            row.skipped = true;
            rows.push_back(row);
            continue;
        }
        const CorruptedLoss corrupted(base);
        const bool corrupt = config.gradcheck_corrupt == method_name(method);
        const PairLoss& loss = corrupt ? static_cast<const PairLoss&>(corrupted) : base;

        // Each method gets its own stream so adding a method leaves the others unchanged.
        Rng rng(config.train.seed * 1000003ULL + static_cast<std::uint64_t>(method));
        std::uniform_int_distribution<int> pick_m(4, 12);
        for (int n = 0; n < config.gradcheck_instances; ++n) {
            const Instance inst =
                sample_instance(loss, hp, pick_m(rng), 10.0 * config.gradcheck_h, rng);
            row.loss_level =
                std::max(row.loss_level, loss_gradient_error(loss, inst, hp, config.gradcheck_h));
        }
        for (int n = 0; n < config.gradcheck_e2e_instances; ++n) {
            const ParamInstance inst = sample_param_instance(loss, hp, 1e-3, rng);
            row.end_to_end =
                std::max(row.end_to_end, param_gradient_error(loss, inst, hp, config.gradcheck_h));
        }
        rows.push_back(row);
    }
    return rows;
}

inline CommandResult cmd_gradcheck(const RunConfig& config) {
    validate(config);
    const auto rows = run_gradcheck(config);
    Document doc("gradcheck");
    doc.echo_config(config);
    bool failed = false;
    doc.table("gradcheck", "method,loss_level_max_rel_err,end_to_end_max_rel_err,status");
    for (const auto& r : rows) {
        const std::string name(method_name(r.method));
        if (r.skipped) {
            doc.row(name + ",,,skipped: gradient-defined method");
            continue;
        }
        const bool ok = r.loss_level < config.gradcheck_tolerance &&
                        r.end_to_end < config.gradcheck_tolerance;
        failed = failed || !ok;
        doc.row(name + ',' + fmt("%.3e", r.loss_level) + ',' + fmt("%.3e", r.end_to_end) + ',' +
                (ok ? "ok" : "ToleranceExceeded"));
    }
    doc.set("result.status", failed ? "fail" : "pass");
    return {failed ? kExitVerification : kExitOk, doc.render()};
}

// ---------------------------------------------------------------------------
// ablate

struct AblationRow {
    Method method;
    RecallReport recall;
};

inline std::vector<AblationRow> run_ablation(const RunConfig& config, const PreparedData& data) {
    std::vector<Method> methods = config.ablate_methods;
    if (methods.empty())
        methods.assign(std::begin(kAllMethods), std::end(kAllMethods));
    std::vector<AblationRow> rows;
    for (Method method : methods) {
        TrainConfig tc = config.train;
        tc.method = method;
        rows.push_back({method, train(tc, data.train_x, data.train_y, data.held_out).final});
    }
    std::stable_sort(rows.begin(), rows.end(), [](const AblationRow& a, const AblationRow& b) {
        return a.recall.recall.front() > b.recall.recall.front();
    });
    return rows;
}

inline CommandResult cmd_ablate(const RunConfig& config) {
    validate(config);
    const PreparedData data = prepare_data(config);
    const auto rows = run_ablation(config, data);

    Document doc("ablate");
    doc.echo_config(config);
    doc.set("note.mined_variants", "binomial_m and lifted_star_m use MS mining with hp.epsilon = " +
                                       detail::format_double(config.train.hp.epsilon));
    {
        Rng rng(config.train.seed);
        const ModelParams init = init_params(config.train.embedding_dim, data.train_x.cols(), rng);
        doc.set("result.untrained_recall_at_" + std::to_string(config.train.ks.front()),
                fmt("%.6f", evaluate(init, data.held_out, config.train.ks).recall.front()));
    }
    std::string header = "method";
    for (int k : config.train.ks)
        header += ",recall_at_" + std::to_string(k);
    doc.table("ablation", header);
    for (const auto& r : rows) {
        std::string line(method_name(r.method));
        for (double v : r.recall.recall)
            line += ',' + fmt("%.6f", v);
        doc.row(std::move(line));
    }
    return {kExitOk, doc.render()};
}

// ---------------------------------------------------------------------------
// dump-weights

/// Fixed miniature batch: anchor 0 with positives 1, 2 and negatives 3, 4, 5.
/// The tracked pair is (0, 3); 4 and 5 are its competitor negatives. The
/// negatives sit near the default lambda so that MS's relative term is
/// visible at beta = 50.
struct WeightProbe {
    SimilarityMatrix s;
    Labels y{0, 0, 0, 1, 1, 1};
    static constexpr Eigen::Index anchor = 0;
    static constexpr Eigen::Index tracked = 3;
};

inline WeightProbe base_probe() {
    WeightProbe p;
    p.s.resize(6, 6);
    for (Eigen::Index i = 0; i < 6; ++i)
        for (Eigen::Index j = 0; j < 6; ++j)
            p.s(i, j) = i == j ? 1.0 : (p.y[i] == p.y[j] ? 0.7 : 0.2);
    const double row0[] = {1.0, 0.99, 0.92, 0.9, 0.89, 0.88};
    for (Eigen::Index j = 0; j < 6; ++j) {
        p.s(0, j) = row0[j];
        p.s(j, 0) = row0[j];
    }
    return p;
}

inline void set_pair(SimilarityMatrix& s, Eigen::Index i, Eigen::Index j, double v) {
    s(i, j) = v;
    s(j, i) = v;
}

struct SweepPoint {
    double x;
    SimilarityMatrix s;
};

/// S: all negatives of the anchor shift up together (relative similarities fixed).
/// N: the competitor negatives move away from the anchor (staying mined).
/// P: the tracked negative is parked at 0.75 while the anchor's hardest
///    positive gets less similar, moving the mining threshold across it.
inline std::vector<SweepPoint> weight_sweep(const std::string& scenario, int points) {
    const WeightProbe base = base_probe();
    std::vector<SweepPoint> out;
    for (int p = 0; p < points; ++p) {
        const double t = static_cast<double>(p) / static_cast<double>(points - 1);
        SimilarityMatrix s = base.s;
        double x = 0.0;
        if (scenario == "S") {
            x = 0.08 * t;
            for (Eigen::Index k : {3, 4, 5})
                set_pair(s, 0, k, base.s(0, k) + x);
        } else if (scenario == "N") {
            x = 0.05 * t;
            for (Eigen::Index k : {4, 5})
                set_pair(s, 0, k, base.s(0, k) - x);
        } else if (scenario == "P") {
            x = 0.99 - 0.19 * t;
            set_pair(s, 0, WeightProbe::tracked, 0.75);
            set_pair(s, 0, 2, x);
        } else {
            throw ConfigError("unknown dump-weights scenario '" + scenario + "'");
        }
        out.push_back({x, std::move(s)});
    }
    return out;
}

inline CommandResult cmd_dump_weights(const RunConfig& config) {
    validate(config);
    const std::string& scenario = config.dump_scenario;
    const WeightProbe probe = base_probe();
    const HyperParams& hp = config.train.hp;
    const auto sweep = weight_sweep(scenario, config.dump_points);

    Document doc("dump-weights");
    doc.echo_config(config);
    doc.set("probe.labels", "0,0,0,1,1,1");
    doc.set("probe.pair", "0,3");
    doc.set("probe.sweep", scenario == "S"   ? "shift added to every negative similarity of anchor 0"
                           : scenario == "N" ? "amount subtracted from competitor negatives (0,4) and (0,5)"
                                             : "similarity of the hardest positive (0,2)");

    const char* axis = scenario == "S" ? "shift" : scenario == "N" ? "competitor_drop" : "hardest_positive";
    std::string header = std::string(axis) + ",s_tracked";
    for (Method m : kAllMethods)
        header += ',' + std::string(method_name(m));
    if (scenario == "P")
        header += ",ms_threshold,ms_selected";
    doc.table("weights", header);

    for (const auto& point : sweep) {
        std::string line = fmt("%.6f", point.x) + ',' + fmt("%.6f", point.s(0, WeightProbe::tracked));
        for (Method m : kAllMethods) {
            const WeightMatrix w = weights_from_gradient(MethodLoss(m), point.s, probe.y, hp);
            line += ',' + fmt("%.9g", w(WeightProbe::anchor, WeightProbe::tracked));
        }
        if (scenario == "P") {
            const double min_pos = std::min(point.s(0, 1), point.s(0, 2));
            const MinedSets mined = ms_mine(point.s, probe.y, hp.epsilon);
            const auto& neg = mined.negatives[0];
            const bool selected = std::find(neg.begin(), neg.end(), WeightProbe::tracked) != neg.end();
            line += ',' + fmt("%.6f", min_pos - hp.epsilon) + ',' + (selected ? "1" : "0");
        }
        doc.row(std::move(line));
    }
    return {kExitOk, doc.render()};
}

}  // namespace msloss
