#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "irda/rng.hpp"

namespace irda {

enum class Domain { Source, Target };

const char* domain_name(Domain d);

// One multi-modal sample. Target segments carry no label here; their hidden
// class lives in Dataset and is reachable only through the eval accessor.
struct Segment {
    std::size_t id = 0;
    Domain domain = Domain::Source;
    std::vector<std::vector<double>> features;  // K vectors of length d
    std::optional<int> label;                   // present iff domain == Source
    bool is_negative = false;                   // generator bookkeeping, invisible to the model
};

struct DomainSpec {
    int num_classes = 8;
    int modalities = 2;
    int feature_dim = 64;
    int samples_per_class = 60;
    double class_sep = 4.0;
    double noise_stddev = 1.0;
    std::vector<double> shift_mag = {4.0, 2.5};  // per modality; scalar JSON input broadcasts
    double negative_fraction = 0.2;
    std::vector<double> class_weights;  // empty = balanced
    std::uint64_t seed = 1;

    void validate() const;  // throws ConfigError
    std::string to_json() const;
    static DomainSpec from_json(const std::string& text);  // strict, rejects unknown keys
    static DomainSpec load(const std::string& path);
};

class Dataset {
public:
    DomainSpec spec;
    std::vector<Segment> source;
    std::vector<Segment> target;

    // Hidden target classes, for evaluation only. Training code must not call this.
    int eval_label(std::size_t target_index) const;
    void set_eval_labels(std::vector<int> labels);
    std::size_t eval_label_count() const { return hidden_target_labels_.size(); }

private:
    std::vector<int> hidden_target_labels_;
};

// Construction-time geometry, exposed for invariant checks and selection scoring.
struct GenerationDebug {
    // class_means[k][c] is the source mean of class c in modality k (pre shift)
    std::vector<std::vector<std::vector<double>>> class_means;
    std::vector<std::vector<double>> shift;            // per modality
    std::vector<std::vector<double>> negative_center;  // displaced source cluster, per modality
    struct AmbiguousInfo {
        std::size_t target_index;  // into Dataset::target
        int class_a = 0;
        int class_b = 0;
        double weight = 0.5;  // convex weight on class_a
    };
    std::vector<AmbiguousInfo> ambiguous;
};

Dataset generate(const DomainSpec& spec);
Dataset generate(const DomainSpec& spec, GenerationDebug* debug);

// encoding: "text" (JSON lines) or "binary" (packed little-endian doubles)
void save_dataset(const Dataset& data, const std::string& path, const std::string& encoding);
Dataset load_dataset(const std::string& path);

struct Batch {
    std::vector<std::size_t> source;  // indices into Dataset::source
    std::vector<std::size_t> target;  // indices into Dataset::target
};

enum class BatchMode { Mixed, SourceOnly, TargetOnly };

// Half-source half-target batches, reshuffled per epoch, remainder dropped.
// The single-domain modes draw whole batches from one split instead.
class BatchIterator {
public:
    BatchIterator(const Dataset& data, std::size_t batch_size, std::uint64_t seed,
                  BatchMode mode = BatchMode::Mixed);
    Batch next();

private:
    void reshuffle_source();
    void reshuffle_target();

    const Dataset* data_;
    std::size_t batch_size_;
    BatchMode mode_;
    Rng rng_;
    std::vector<std::size_t> source_order_;
    std::vector<std::size_t> target_order_;
    std::size_t source_pos_ = 0;
    std::size_t target_pos_ = 0;
};

}  // namespace irda
