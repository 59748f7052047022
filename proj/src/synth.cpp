#include "irda/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>
#include <utility>

#include "json.hpp"

#include "irda/common.hpp"

namespace irda {

using nlohmann::json;

namespace {

// rng stream ids under the dataset seed
constexpr std::uint64_t kStreamSetup = 0;
constexpr std::uint64_t kStreamSource = 1;
constexpr std::uint64_t kStreamTarget = 2;
constexpr std::uint64_t kStreamSelect = 3;

// the source negative cluster keeps this many class separations of distance
// from every shifted class mean
constexpr double kSourceNegativeDepth = 4.5;

double sq_dist(const std::vector<double>& a, const std::vector<double>& b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double diff = a[i] - b[i];
        acc += diff * diff;
    }
    return acc;
}

json spec_to_json_obj(const DomainSpec& s) {
    json j;
    j["num_classes"] = s.num_classes;
    j["modalities"] = s.modalities;
    j["feature_dim"] = s.feature_dim;
    j["samples_per_class"] = s.samples_per_class;
    j["class_sep"] = s.class_sep;
    j["noise_stddev"] = s.noise_stddev;
    j["shift_mag"] = s.shift_mag;
    j["negative_fraction"] = s.negative_fraction;
    if (!s.class_weights.empty()) j["class_weights"] = s.class_weights;
    j["seed"] = s.seed;
    return j;
}

DomainSpec spec_from_json_obj(const json& j) {
    if (!j.is_object()) throw ConfigError("domain spec must be a JSON object");
    static const char* known[] = {"num_classes",  "modalities",        "feature_dim",
                                  "samples_per_class", "class_sep",    "noise_stddev",
                                  "shift_mag",    "negative_fraction", "class_weights",
                                  "seed"};
    for (const auto& item : j.items()) {
        bool ok = false;
        for (const char* k : known) {
            if (item.key() == k) {
                ok = true;
                break;
            }
        }
        if (!ok) throw ConfigError("unknown domain spec key: " + item.key());
    }
    DomainSpec s;
    try {
        if (j.contains("num_classes")) s.num_classes = j.at("num_classes").get<int>();
        if (j.contains("modalities")) s.modalities = j.at("modalities").get<int>();
        if (j.contains("feature_dim")) s.feature_dim = j.at("feature_dim").get<int>();
        if (j.contains("samples_per_class"))
            s.samples_per_class = j.at("samples_per_class").get<int>();
        if (j.contains("class_sep")) s.class_sep = j.at("class_sep").get<double>();
        if (j.contains("noise_stddev")) s.noise_stddev = j.at("noise_stddev").get<double>();
        if (j.contains("shift_mag")) {
            const json& sm = j.at("shift_mag");
            if (sm.is_number()) {
                s.shift_mag.assign(static_cast<std::size_t>(std::max(s.modalities, 1)),
                                   sm.get<double>());
            } else {
                s.shift_mag = sm.get<std::vector<double>>();
            }
        }
        if (j.contains("negative_fraction"))
            s.negative_fraction = j.at("negative_fraction").get<double>();
        if (j.contains("class_weights"))
            s.class_weights = j.at("class_weights").get<std::vector<double>>();
        if (j.contains("seed")) s.seed = j.at("seed").get<std::uint64_t>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("bad domain spec value: ") + e.what());
    }
    // a scalar shift given before/without "modalities" must still cover K entries
    if (s.shift_mag.size() == 1 && s.modalities > 1) {
        s.shift_mag.assign(static_cast<std::size_t>(s.modalities), s.shift_mag[0]);
    }
    s.validate();
    return s;
}

}  // namespace

const char* domain_name(Domain d) { return d == Domain::Source ? "source" : "target"; }

void DomainSpec::validate() const {
    if (num_classes < 2) throw ConfigError("num_classes must be at least 2");
    if (modalities < 1) throw ConfigError("modalities must be at least 1");
    if (feature_dim < 2) throw ConfigError("feature_dim must be at least 2");
    if (num_classes > feature_dim) {
        throw ConfigError("feature_dim must be at least num_classes so every class gets its own axis");
    }
    if (samples_per_class < 1) throw ConfigError("samples_per_class must be positive");
    if (!(class_sep > 0.0)) throw ConfigError("class_sep must be positive");
    if (!(noise_stddev > 0.0)) throw ConfigError("noise_stddev must be positive");
    if (shift_mag.size() != static_cast<std::size_t>(modalities)) {
        throw ConfigError("shift_mag needs one entry per modality");
    }
    for (double m : shift_mag) {
        if (!(m >= 0.0)) throw ConfigError("shift_mag entries must be non-negative");
    }
    if (!(negative_fraction >= 0.0 && negative_fraction < 1.0)) {
        throw ConfigError("negative_fraction must lie in [0, 1)");
    }
    if (!class_weights.empty()) {
        if (class_weights.size() != static_cast<std::size_t>(num_classes)) {
            throw ConfigError("class_weights needs one entry per class");
        }
        for (double w : class_weights) {
            if (!(w > 0.0)) throw ConfigError("class_weights entries must be positive");
        }
    }
}

std::string DomainSpec::to_json() const { return spec_to_json_obj(*this).dump(); }

DomainSpec DomainSpec::from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("domain spec is not valid JSON: ") + e.what());
    }
    return spec_from_json_obj(j);
}

DomainSpec DomainSpec::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open domain spec file: " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return from_json(buf.str());
}

int Dataset::eval_label(std::size_t target_index) const {
    if (target_index >= hidden_target_labels_.size()) {
        throw IndexError("eval_label: target index out of range");
    }
    return hidden_target_labels_[target_index];
}

void Dataset::set_eval_labels(std::vector<int> labels) {
    hidden_target_labels_ = std::move(labels);
}

Dataset generate(const DomainSpec& spec) { return generate(spec, nullptr); }

Dataset generate(const DomainSpec& spec, GenerationDebug* debug) {
    spec.validate();
    const int C = spec.num_classes;
    const int K = spec.modalities;
    const int d = spec.feature_dim;
    const double sep = spec.class_sep;
    const double sigma = spec.noise_stddev;

    Rng setup(stream_seed(spec.seed, kStreamSetup));
    Rng src_rng(stream_seed(spec.seed, kStreamSource));
    Rng tgt_rng(stream_seed(spec.seed, kStreamTarget));
    Rng sel_rng(stream_seed(spec.seed, kStreamSelect));

    // Class c in modality k sits on coordinate axis (c + k) % d, scaled by the
    // separation, plus a small jitter so means are not axis-exact.
    const double jitter_std = 0.1 * sep / std::sqrt(static_cast<double>(d));
    std::vector<std::vector<std::vector<double>>> means(
        K, std::vector<std::vector<double>>(C, std::vector<double>(d, 0.0)));
    for (int k = 0; k < K; ++k) {
        for (int c = 0; c < C; ++c) {
            means[k][c][(c + k) % d] = sep;
            for (int j = 0; j < d; ++j) means[k][c][j] += setup.normal(0.0, jitter_std);
        }
    }

    // The shift stays inside the span of the class axes, so it re-mixes classes
    // instead of translating the whole cloud into empty space.
    std::vector<std::vector<double>> shift(K, std::vector<double>(d, 0.0));
    for (int k = 0; k < K; ++k) {
        std::vector<double> coef(C);
        double norm = 0.0;
        for (int c = 0; c < C; ++c) {
            coef[c] = setup.normal();
            norm += coef[c] * coef[c];
        }
        norm = std::sqrt(norm);
        if (norm == 0.0) norm = 1.0;
        for (int c = 0; c < C; ++c) {
            shift[k][(c + k) % d] += spec.shift_mag[k] * coef[c] / norm;
        }
    }

    // All ambiguous target instances blend the same two classes, drawn once
    // per dataset. Concentrated on one pair they form a single coherent
    // filament the discriminator can fence off cheaply, the way it fences
    // off the source cluster; spread over random pairs they would dissolve
    // into dozens of slivers no practical capacity can track.
    const int pair_a = static_cast<int>(setup.uniform_index(static_cast<std::size_t>(C)));
    const int pair_b =
        static_cast<int>((static_cast<std::size_t>(pair_a) + 1 +
                          setup.uniform_index(static_cast<std::size_t>(C - 1))) %
                         static_cast<std::size_t>(C));

    // The source cluster gets its own class pair, away from the filament's,
    // so the two negative structures occupy unrelated axes.
    int blob_a = 0;
    int blob_b = 1 % C;
    if (C >= 4) {
        std::vector<int> rest;
        for (int c = 0; c < C; ++c) {
            if (c != pair_a && c != pair_b) rest.push_back(c);
        }
        const std::size_t i = setup.uniform_index(rest.size());
        std::size_t j = setup.uniform_index(rest.size() - 1);
        if (j >= i) ++j;
        blob_a = rest[i];
        blob_b = rest[j];
    } else if (C >= 2) {
        blob_a = static_cast<int>(setup.uniform_index(static_cast<std::size_t>(C)));
        blob_b = static_cast<int>((static_cast<std::size_t>(blob_a) + 1 +
                                   setup.uniform_index(static_cast<std::size_t>(C - 1))) %
                                  static_cast<std::size_t>(C));
    }

    // Less-relevant source negatives come from one displaced cluster per
    // modality, kept well away from every target mean. It sits inside the
    // span of the class axes, where classification pretraining preserves
    // directions, but orthogonal to the domain shift, so closing the domain
    // gap never requires moving it. Left alone and far out, it keeps a
    // saturated discriminator score for the whole run.
    std::vector<std::vector<double>> neg_center(K, std::vector<double>(d, 0.0));
    for (int k = 0; k < K; ++k) {
        std::vector<double> v(d);
        for (int j = 0; j < d; ++j) v[j] = means[k][blob_a][j] + means[k][blob_b][j];
        double shift_sq = 0.0;
        for (int j = 0; j < d; ++j) shift_sq += shift[k][j] * shift[k][j];
        if (shift_sq > 0.0) {
            double proj = 0.0;
            for (int j = 0; j < d; ++j) proj += v[j] * shift[k][j];
            proj /= shift_sq;
            for (int j = 0; j < d; ++j) v[j] -= proj * shift[k][j];
        }
        double norm = 0.0;
        for (int j = 0; j < d; ++j) norm += v[j] * v[j];
        norm = std::sqrt(norm);
        if (norm < 1e-12) {
            // shift happened to swallow the pair axis; use the raw pair axis
            for (int j = 0; j < d; ++j) v[j] = means[k][blob_a][j] + means[k][blob_b][j];
            norm = 0.0;
            for (int j = 0; j < d; ++j) norm += v[j] * v[j];
            norm = std::sqrt(norm);
            if (norm < 1e-12) norm = 1.0;
        }
        for (int j = 0; j < d; ++j) {
            neg_center[k][j] = -kSourceNegativeDepth * sep * v[j] / norm;
        }
        const double min_allowed = kSourceNegativeDepth * kSourceNegativeDepth * sep * sep;
        for (;;) {
            double min_sq = std::numeric_limits<double>::infinity();
            std::vector<double> tm(d);
            for (int c = 0; c < C; ++c) {
                for (int j = 0; j < d; ++j) tm[j] = means[k][c][j] + shift[k][j];
                min_sq = std::min(min_sq, sq_dist(neg_center[k], tm));
            }
            if (min_sq >= min_allowed) break;
            for (int j = 0; j < d; ++j) neg_center[k][j] *= 1.5;
        }
    }

    // per-class counts; weights scale around samples_per_class and keep every class populated
    std::vector<std::size_t> counts(C, static_cast<std::size_t>(spec.samples_per_class));
    if (!spec.class_weights.empty()) {
        double wsum = 0.0;
        for (double w : spec.class_weights) wsum += w;
        for (int c = 0; c < C; ++c) {
            const double share = spec.class_weights[c] * C / wsum;
            const auto n = static_cast<long long>(std::llround(spec.samples_per_class * share));
            counts[c] = static_cast<std::size_t>(std::max(1LL, n));
        }
    }

    Dataset data;
    data.spec = spec;

    std::size_t next_id = 0;
    for (int c = 0; c < C; ++c) {
        for (std::size_t i = 0; i < counts[c]; ++i) {
            Segment seg;
            seg.id = next_id++;
            seg.domain = Domain::Source;
            seg.label = c;
            seg.features.resize(K);
            for (int k = 0; k < K; ++k) {
                seg.features[k].resize(d);
                for (int j = 0; j < d; ++j) {
                    seg.features[k][j] = means[k][c][j] + sigma * src_rng.normal();
                }
            }
            data.source.push_back(std::move(seg));
        }
    }

    std::vector<int> hidden;
    for (int c = 0; c < C; ++c) {
        for (std::size_t i = 0; i < counts[c]; ++i) {
            Segment seg;
            seg.id = next_id++;
            seg.domain = Domain::Target;
            seg.features.resize(K);
            for (int k = 0; k < K; ++k) {
                seg.features[k].resize(d);
                for (int j = 0; j < d; ++j) {
                    seg.features[k][j] = means[k][c][j] + shift[k][j] + sigma * tgt_rng.normal();
                }
            }
            hidden.push_back(c);
            data.target.push_back(std::move(seg));
        }
    }

    if (debug) {
        debug->class_means = means;
        debug->shift = shift;
        debug->negative_center = neg_center;
        debug->ambiguous.clear();
    }

    // negative injection; exactly floor(fraction * N) per domain
    const auto pick_negatives = [&](std::size_t n) {
        std::vector<std::size_t> order(n);
        for (std::size_t i = 0; i < n; ++i) order[i] = i;
        sel_rng.shuffle(order);
        const auto n_neg = static_cast<std::size_t>(
            std::floor(spec.negative_fraction * static_cast<double>(n)));
        order.resize(n_neg);
        std::sort(order.begin(), order.end());
        return order;
    };

    // A tenth of the nominal spread keeps the cluster coherent: the points
    // are too close together for a smooth extractor to fit their conflicting
    // claimed labels individually, so the cluster cannot be dispersed into
    // the class regions during classification pretraining.
    for (std::size_t idx : pick_negatives(data.source.size())) {
        Segment& seg = data.source[idx];
        seg.is_negative = true;  // claimed label stays; the features no longer match it
        for (int k = 0; k < K; ++k) {
            for (int j = 0; j < d; ++j) {
                seg.features[k][j] = neg_center[k][j] + 0.1 * sigma * sel_rng.normal();
            }
        }
    }

    for (std::size_t idx : pick_negatives(data.target.size())) {
        Segment& seg = data.target[idx];
        seg.is_negative = true;
        const int a = pair_a;
        const int b = pair_b;
        const double w = 0.4 + 0.2 * sel_rng.uniform();
        // a tenth of the nominal spread: ambiguous samples form one tight
        // filament between the two chosen classes instead of dissolving into
        // the neighbouring clusters
        for (int k = 0; k < K; ++k) {
            for (int j = 0; j < d; ++j) {
                seg.features[k][j] = w * means[k][a][j] + (1.0 - w) * means[k][b][j] +
                                     shift[k][j] + 0.1 * sigma * sel_rng.normal();
            }
        }
        // hidden class becomes whichever of the two blended classes the sample
        // landed nearest; the domain offset is common to both candidates so it
        // cannot reassign the class
        double best = std::numeric_limits<double>::infinity();
        int best_c = a;
        std::vector<double> tm(d);
        for (int c : {a, b}) {
            double total = 0.0;
            for (int k = 0; k < K; ++k) {
                for (int j = 0; j < d; ++j) tm[j] = means[k][c][j] + shift[k][j];
                total += sq_dist(seg.features[k], tm);
            }
            if (total < best) {
                best = total;
                best_c = c;
            }
        }
        hidden[idx] = best_c;
        if (debug) debug->ambiguous.push_back({idx, a, b, w});
    }

    data.set_eval_labels(std::move(hidden));
    return data;
}

namespace {

json segment_to_json(const Segment& seg, const Dataset& data, std::size_t target_index) {
    json j;
    j["id"] = seg.id;
    j["domain"] = domain_name(seg.domain);
    if (seg.domain == Domain::Source) {
        j["label"] = seg.label.has_value() ? json(*seg.label) : json(nullptr);
    } else {
        // hidden class rides along in the file; the loader quarantines it again
        j["label"] = target_index < data.eval_label_count()
                         ? json(data.eval_label(target_index))
                         : json(nullptr);
    }
    j["negative"] = seg.is_negative;
    j["features"] = seg.features;
    return j;
}

void write_binary_segment(std::ofstream& out, const Segment& seg, bool has_label, int label) {
    const std::uint64_t id = seg.id;
    const std::uint8_t dom = seg.domain == Domain::Source ? 0 : 1;
    const std::uint8_t hl = has_label ? 1 : 0;
    const std::int32_t lab = label;
    const std::uint8_t neg = seg.is_negative ? 1 : 0;
    out.write(reinterpret_cast<const char*>(&id), sizeof(id));
    out.write(reinterpret_cast<const char*>(&dom), sizeof(dom));
    out.write(reinterpret_cast<const char*>(&hl), sizeof(hl));
    out.write(reinterpret_cast<const char*>(&lab), sizeof(lab));
    out.write(reinterpret_cast<const char*>(&neg), sizeof(neg));
    for (const auto& mod : seg.features) {
        out.write(reinterpret_cast<const char*>(mod.data()),
                  static_cast<std::streamsize>(mod.size() * sizeof(double)));
    }
}

}  // namespace

void save_dataset(const Dataset& data, const std::string& path, const std::string& encoding) {
    if (encoding != "text" && encoding != "binary") {
        throw ConfigError("dataset encoding must be \"text\" or \"binary\"");
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open dataset file for writing: " + path);

    json header;
    header["format_version"] = 1;
    header["encoding"] = encoding;
    header["spec"] = spec_to_json_obj(data.spec);
    header["num_source"] = data.source.size();
    header["num_target"] = data.target.size();
    out << header.dump() << '\n';

    if (encoding == "text") {
        for (const Segment& seg : data.source) {
            out << segment_to_json(seg, data, 0).dump() << '\n';
        }
        for (std::size_t i = 0; i < data.target.size(); ++i) {
            out << segment_to_json(data.target[i], data, i).dump() << '\n';
        }
    } else {
        for (const Segment& seg : data.source) {
            write_binary_segment(out, seg, seg.label.has_value(),
                                 seg.label.value_or(0));
        }
        for (std::size_t i = 0; i < data.target.size(); ++i) {
            const bool has = i < data.eval_label_count();
            write_binary_segment(out, data.target[i], has, has ? data.eval_label(i) : 0);
        }
    }
    if (!out) throw IoError("failed writing dataset file: " + path);
}

Dataset load_dataset(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open dataset file: " + path);
    std::string header_line;
    if (!std::getline(in, header_line)) throw IoError("dataset file has no header: " + path);

    json header;
    try {
        header = json::parse(header_line);
    } catch (const json::exception& e) {
        throw IoError("dataset header is not valid JSON: " + std::string(e.what()));
    }
    if (!header.is_object() || header.value("format_version", 0) != 1) {
        throw IoError("unsupported dataset format version");
    }
    const std::string encoding = header.value("encoding", "");
    if (encoding != "text" && encoding != "binary") {
        throw IoError("dataset header has unknown encoding");
    }
    if (!header.contains("spec")) throw IoError("dataset header is missing the spec");

    Dataset data;
    data.spec = spec_from_json_obj(header.at("spec"));
    const auto num_source = header.value("num_source", std::size_t{0});
    const auto num_target = header.value("num_target", std::size_t{0});
    const auto K = static_cast<std::size_t>(data.spec.modalities);
    const auto d = static_cast<std::size_t>(data.spec.feature_dim);

    std::vector<int> hidden;
    const auto accept = [&](Segment&& seg, bool has_label, int label) {
        if (seg.features.size() != K) throw IoError("dataset record has wrong modality count");
        for (const auto& mod : seg.features) {
            if (mod.size() != d) throw IoError("dataset record has wrong feature length");
        }
        if (seg.domain == Domain::Source) {
            if (has_label) seg.label = label;
            data.source.push_back(std::move(seg));
        } else {
            seg.label.reset();
            hidden.push_back(has_label ? label : -1);
            data.target.push_back(std::move(seg));
        }
    };

    if (encoding == "text") {
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            json j;
            try {
                j = json::parse(line);
            } catch (const json::exception& e) {
                throw IoError("dataset record is not valid JSON: " + std::string(e.what()));
            }
            Segment seg;
            seg.id = j.value("id", std::size_t{0});
            const std::string dom = j.value("domain", "");
            if (dom == "source") {
                seg.domain = Domain::Source;
            } else if (dom == "target") {
                seg.domain = Domain::Target;
            } else {
                throw IoError("dataset record has unknown domain: " + dom);
            }
            seg.is_negative = j.value("negative", false);
            seg.features = j.value("features", std::vector<std::vector<double>>{});
            const bool has_label = j.contains("label") && !j.at("label").is_null();
            accept(std::move(seg), has_label, has_label ? j.at("label").get<int>() : 0);
        }
    } else {
        const std::size_t total = num_source + num_target;
        for (std::size_t i = 0; i < total; ++i) {
            std::uint64_t id = 0;
            std::uint8_t dom = 0, hl = 0, neg = 0;
            std::int32_t lab = 0;
            in.read(reinterpret_cast<char*>(&id), sizeof(id));
            in.read(reinterpret_cast<char*>(&dom), sizeof(dom));
            in.read(reinterpret_cast<char*>(&hl), sizeof(hl));
            in.read(reinterpret_cast<char*>(&lab), sizeof(lab));
            in.read(reinterpret_cast<char*>(&neg), sizeof(neg));
            Segment seg;
            seg.id = id;
            seg.domain = dom == 0 ? Domain::Source : Domain::Target;
            seg.is_negative = neg != 0;
            seg.features.assign(K, std::vector<double>(d));
            for (auto& mod : seg.features) {
                in.read(reinterpret_cast<char*>(mod.data()),
                        static_cast<std::streamsize>(d * sizeof(double)));
            }
            if (!in) throw IoError("dataset file is truncated: " + path);
            accept(std::move(seg), hl != 0, lab);
        }
    }

    if (data.source.size() != num_source || data.target.size() != num_target) {
        throw IoError("dataset record count does not match its header");
    }
    data.set_eval_labels(std::move(hidden));
    return data;
}

BatchIterator::BatchIterator(const Dataset& data, std::size_t batch_size, std::uint64_t seed,
                             BatchMode mode)
    : data_(&data), batch_size_(batch_size), mode_(mode), rng_(seed) {
    if (batch_size == 0) throw ConfigError("batch_size must be positive");
    switch (mode_) {
        case BatchMode::SourceOnly:
            if (batch_size > data.source.size()) {
                throw ConfigError("batch_size exceeds the source split");
            }
            reshuffle_source();
            break;
        case BatchMode::TargetOnly:
            if (batch_size > data.target.size()) {
                throw ConfigError("batch_size exceeds the target split");
            }
            reshuffle_target();
            break;
        case BatchMode::Mixed:
            if (batch_size % 2 != 0) throw ConfigError("mixed batch_size must be even");
            if (batch_size / 2 > data.source.size() || batch_size / 2 > data.target.size()) {
                throw ConfigError("batch_size exceeds the dataset");
            }
            reshuffle_source();
            reshuffle_target();
            break;
    }
}

void BatchIterator::reshuffle_source() {
    source_order_.resize(data_->source.size());
    for (std::size_t i = 0; i < source_order_.size(); ++i) source_order_[i] = i;
    rng_.shuffle(source_order_);
    source_pos_ = 0;
}

void BatchIterator::reshuffle_target() {
    target_order_.resize(data_->target.size());
    for (std::size_t i = 0; i < target_order_.size(); ++i) target_order_[i] = i;
    rng_.shuffle(target_order_);
    target_pos_ = 0;
}

Batch BatchIterator::next() {
    Batch batch;
    const std::size_t need_s = mode_ == BatchMode::Mixed ? batch_size_ / 2
                               : mode_ == BatchMode::SourceOnly ? batch_size_
                                                                : 0;
    const std::size_t need_t = mode_ == BatchMode::Mixed ? batch_size_ / 2
                               : mode_ == BatchMode::TargetOnly ? batch_size_
                                                                : 0;
    if (need_s > 0) {
        if (source_pos_ + need_s > source_order_.size()) reshuffle_source();
        batch.source.assign(
            source_order_.begin() + static_cast<std::ptrdiff_t>(source_pos_),
            source_order_.begin() + static_cast<std::ptrdiff_t>(source_pos_ + need_s));
        source_pos_ += need_s;
    }
    if (need_t > 0) {
        if (target_pos_ + need_t > target_order_.size()) reshuffle_target();
        batch.target.assign(
            target_order_.begin() + static_cast<std::ptrdiff_t>(target_pos_),
            target_order_.begin() + static_cast<std::ptrdiff_t>(target_pos_ + need_t));
        target_pos_ += need_t;
    }
    return batch;
}

}  // namespace irda
