#include "sagc/evaluation.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "numfmt.hpp"
#include "sagc/error.hpp"

namespace sagc {

namespace {

std::string csv_field(std::string_view s) {
    if (s.find_first_of(",\"\n") == std::string_view::npos) return std::string(s);
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

std::string fixed2(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

}  // namespace

ConfusionMatrix confusion_matrix(std::span<const int> predictions, std::span<const int> labels) {
    if (predictions.size() != labels.size()) {
        throw Error(ErrorKind::ShapeMismatch, std::to_string(predictions.size()) + " predictions for " +
                                                  std::to_string(labels.size()) + " labels");
    }
    ConfusionMatrix m{};
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] < 0) continue;
        if (labels[i] >= kNumClasses || predictions[i] < 0 || predictions[i] >= kNumClasses) {
            throw Error(ErrorKind::LabelOutOfRange, "entry " + std::to_string(i) + ": label " +
                                                        std::to_string(labels[i]) + ", prediction " +
                                                        std::to_string(predictions[i]));
        }
        ++m[static_cast<std::size_t>(labels[i])][static_cast<std::size_t>(predictions[i])];
    }
    return m;
}

ConfusionMatrix& operator+=(ConfusionMatrix& lhs, const ConfusionMatrix& rhs) {
    for (std::size_t a = 0; a < lhs.size(); ++a) {
        for (std::size_t p = 0; p < lhs[a].size(); ++p) lhs[a][p] += rhs[a][p];
    }
    return lhs;
}

std::array<std::optional<std::array<double, kNumClasses>>, kNumClasses> normalized_rows(const ConfusionMatrix& m) {
    std::array<std::optional<std::array<double, kNumClasses>>, kNumClasses> out;
    for (std::size_t a = 0; a < m.size(); ++a) {
        long long row = 0;
        for (long long v : m[a]) row += v;
        if (row == 0) continue;
        std::array<double, kNumClasses> r{};
        for (std::size_t p = 0; p < r.size(); ++p) r[p] = 100.0 * static_cast<double>(m[a][p]) / static_cast<double>(row);
        out[a] = r;
    }
    return out;
}

std::optional<long long> EvaluationReport::total_train() const {
    if (!train_counts) return std::nullopt;
    long long t = 0;
    for (long long v : *train_counts) t += v;
    return t;
}

long long ConfusionCounts::total() const {
    long long t = 0;
    for (long long s : support) t += s;
    return t;
}

ConfusionCounts confusion_counts(const ConfusionMatrix& m) {
    ConfusionCounts c;
    for (std::size_t a = 0; a < m.size(); ++a) {
        for (std::size_t p = 0; p < m[a].size(); ++p) {
            const long long v = m[a][p];
            c.support[a] += v;
            if (a == p) {
                c.tp[a] += v;
            } else {
                c.fn[a] += v;
                c.fp[p] += v;
            }
        }
    }
    return c;
}

double precision(const ConfusionCounts& counts, ClassId c) {
    const auto i = static_cast<std::size_t>(label(c).id);
    const long long denom = counts.tp[i] + counts.fp[i];
    return denom == 0 ? 0.0 : static_cast<double>(counts.tp[i]) / static_cast<double>(denom);
}

double recall(const ConfusionCounts& counts, ClassId c) {
    const auto i = static_cast<std::size_t>(label(c).id);
    const long long denom = counts.tp[i] + counts.fn[i];
    return denom == 0 ? 0.0 : static_cast<double>(counts.tp[i]) / static_cast<double>(denom);
}

double f1(double p, double r) {
    if (p + r == 0.0) return 0.0;
    return 2.0 * p * r / (p + r);
}

EvaluationReport build_report(const ConfusionMatrix& confusion, const std::optional<ClassTally>& train_counts) {
    EvaluationReport rep;
    rep.confusion = confusion;
    const auto counts = confusion_counts(confusion);
    double sp = 0.0, sr = 0.0, sf = 0.0;
    for (ClassId c = 0; c < kNumClasses; ++c) {
        const long long support = counts.support[static_cast<std::size_t>(c)];
        rep.correct += counts.tp[static_cast<std::size_t>(c)];
        if (support == 0) continue;
        ClassMetrics m;
        m.class_id = c;
        m.precision = precision(counts, c);
        m.recall = recall(counts, c);
        m.f1 = f1(m.precision, m.recall);
        m.support = support;
        if (train_counts) m.train_count = (*train_counts)[static_cast<std::size_t>(c)];
        const auto w = static_cast<double>(support);
        sp += w * m.precision;
        sr += w * m.recall;
        sf += w * m.f1;
        rep.total_support += support;
        rep.classes.push_back(m);
    }
    if (rep.total_support > 0) {
        const auto total = static_cast<double>(rep.total_support);
        rep.weighted_precision = sp / total;
        rep.weighted_recall = sr / total;
        rep.weighted_f1 = sf / total;
    }
    rep.train_counts = train_counts;
    return rep;
}

Prediction predict(const Checkpoint& ckpt, const FeaturizedGraph& graph) {
    const auto standardized = apply_standardizer(ckpt.stats, graph);
    const auto out = model_forward(ckpt.params, ckpt.model_config, standardized);
    const auto log_p = ad::log_softmax_rows(out.logits);
    const std::size_t n = graph.node_count();
    Prediction pred;
    pred.predicted.resize(n);
    pred.probabilities = Matrix(n, kNumClasses);
    for (std::size_t i = 0; i < n; ++i) {
        int best = 0;
        for (std::size_t c = 0; c < static_cast<std::size_t>(kNumClasses); ++c) {
            const double lp = log_p.at(i * kNumClasses + c);
            pred.probabilities(i, c) = std::exp(lp);
            if (lp > log_p.at(i * kNumClasses + static_cast<std::size_t>(best))) best = static_cast<int>(c);
        }
        pred.predicted[i] = best;
    }
    const std::size_t width = out.penultimate.dim(1);
    pred.penultimate = Matrix(n, width);
    std::copy(out.penultimate.data().begin(), out.penultimate.data().end(), pred.penultimate.data.begin());
    return pred;
}

EvaluationReport evaluate(const Checkpoint& ckpt, std::span<const FeaturizedGraph> graphs,
                          const std::optional<ClassTally>& train_counts, std::string split) {
    ConfusionMatrix total{};
    std::vector<std::string> names;
    for (const auto& g : graphs) {
        const auto pred = predict(ckpt, g);
        total += confusion_matrix(pred.predicted, g.labels);
        names.push_back(g.name);
    }
    auto rep = build_report(total, train_counts);
    rep.split = std::move(split);
    rep.graphs = std::move(names);
    return rep;
}

ClassTally label_tally(std::span<const FeaturizedGraph> graphs) {
    ClassTally t{};
    for (const auto& g : graphs) {
        for (int l : g.labels) {
            if (l >= 0 && l < kNumClasses) ++t[static_cast<std::size_t>(l)];
        }
    }
    return t;
}

json to_json(const EvaluationReport& rep) {
    json classes = json::array();
    for (const auto& m : rep.classes) {
        json row = {{"class", std::string(label(m.class_id).name)},
                    {"id", m.class_id},
                    {"precision", m.precision},
                    {"recall", m.recall},
                    {"f1", m.f1},
                    {"support", m.support}};
        if (m.train_count) row["train_count"] = *m.train_count;
        classes.push_back(std::move(row));
    }
    json confusion = json::array();
    for (const auto& row : rep.confusion) confusion.push_back(row);
    json normalized = json::array();
    for (const auto& row : normalized_rows(rep.confusion)) {
        normalized.push_back(row ? json(*row) : json(nullptr));
    }
    json names = json::array();
    for (const auto& l : all_labels()) names.push_back(std::string(l.name));
    json out = {{"split", rep.split},
                {"graphs", rep.graphs},
                {"classes", classes},
                {"weighted_average",
                 {{"precision", rep.weighted_precision}, {"recall", rep.weighted_recall}, {"f1", rep.weighted_f1}}},
                {"total_support", rep.total_support},
                {"correct", rep.correct},
                {"accuracy", rep.accuracy()},
                {"class_names", names},
                {"confusion", confusion},
                {"confusion_row_percent", normalized}};
    if (rep.train_counts) {
        out["train_counts"] = *rep.train_counts;
        out["total_train"] = *rep.total_train();
    }
    return out;
}

std::string report_table(const EvaluationReport& rep) {
    std::array<const ClassMetrics*, kNumClasses> by_class{};
    for (const auto& m : rep.classes) by_class[static_cast<std::size_t>(m.class_id)] = &m;
    const ClassTally* train = rep.train_counts ? &*rep.train_counts : nullptr;
    std::string out;
    char line[160];
    std::snprintf(line, sizeof line, "%-28s %10s %10s %10s %10s %10s\n", "Class", "Train", "Test", "Precision",
                  "Recall", "F1");
    out += line;
    for (const auto& l : all_labels()) {
        const ClassMetrics* m = by_class[static_cast<std::size_t>(l.id)];
        std::string train_cell = "-";
        if (train != nullptr) train_cell = std::to_string((*train)[static_cast<std::size_t>(l.id)]);
        if (m == nullptr) {
            std::snprintf(line, sizeof line, "%-28s %10s %10s %10s %10s %10s\n", std::string(l.name).c_str(),
                          train_cell.c_str(), "0", "-", "-", "-");
        } else {
            std::snprintf(line, sizeof line, "%-28s %10s %10lld %10s %10s %10s\n", std::string(l.name).c_str(),
                          train_cell.c_str(), m->support, fixed2(m->precision).c_str(), fixed2(m->recall).c_str(),
                          fixed2(m->f1).c_str());
        }
        out += line;
    }
    const auto train_total = rep.total_train();
    const std::string total_train = train_total ? std::to_string(*train_total) : "-";
    std::snprintf(line, sizeof line, "%-28s %10s %10lld %10s %10s %10s\n", "Total count/Weighted Avg",
                  total_train.c_str(), rep.total_support, fixed2(rep.weighted_precision).c_str(),
                  fixed2(rep.weighted_recall).c_str(), fixed2(rep.weighted_f1).c_str());
    out += line;
    std::snprintf(line, sizeof line, "split: %s, graphs: %zu, accuracy: %.4f\n", rep.split.c_str(), rep.graphs.size(),
                  rep.accuracy());
    out += line;
    return out;
}

namespace {

std::string confusion_header() {
    std::string out = "actual\\predicted";
    for (const auto& l : all_labels()) out += "," + std::string(l.name);
    return out + "\n";
}

}  // namespace

std::string confusion_csv(const ConfusionMatrix& m) {
    std::string out = confusion_header();
    for (std::size_t a = 0; a < m.size(); ++a) {
        out += std::string(label(static_cast<ClassId>(a)).name);
        for (long long v : m[a]) out += "," + std::to_string(v);
        out += "\n";
    }
    return out;
}

std::string normalized_confusion_csv(const ConfusionMatrix& m) {
    const auto rows = normalized_rows(m);
    std::string out = confusion_header();
    for (std::size_t a = 0; a < m.size(); ++a) {
        out += std::string(label(static_cast<ClassId>(a)).name);
        for (std::size_t p = 0; p < m[a].size(); ++p) {
            out += ",";
            if (rows[a]) out += detail::fmt17((*rows[a])[p]);
        }
        out += "\n";
    }
    return out;
}

std::string embeddings_csv(const Checkpoint& ckpt, std::span<const FeaturizedGraph> graphs) {
    const std::size_t width = ckpt.model_config.penultimate_width();
    std::string out = "graph,node_id,true_label,predicted_label";
    for (std::size_t j = 1; j <= width; ++j) out += ",e_" + std::to_string(j);
    out += "\n";
    for (const auto& g : graphs) {
        const auto pred = predict(ckpt, g);
        for (std::size_t i = 0; i < g.node_count(); ++i) {
            out += csv_field(g.name) + "," + csv_field(g.node_ids[i]) + ",";
            if (g.labels[i] >= 0) out += std::string(label(g.labels[i]).name);
            out += "," + std::string(label(pred.predicted[i]).name);
            for (double v : pred.penultimate.row(i)) out += "," + detail::fmt17(v);
            out += "\n";
        }
    }
    return out;
}

std::size_t export_embeddings(const Checkpoint& ckpt, std::span<const FeaturizedGraph> graphs,
                              const std::filesystem::path& path) {
    const std::string text = embeddings_csv(ckpt, graphs);
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error(ErrorKind::IoFailure, "cannot write " + path.string());
    f << text;
    if (!f) throw Error(ErrorKind::IoFailure, "short write to " + path.string());
    std::size_t rows = 0;
    for (const auto& g : graphs) rows += g.node_count();
    return rows;
}

}  // namespace sagc
