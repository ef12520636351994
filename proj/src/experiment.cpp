#include "asymkd/experiment.hpp"

#include <cstdio>
#include <ctime>

#include "asymkd/io.hpp"
#include "json.hpp"

namespace asymkd {

using nlohmann::json;

void ExperimentConfig::resolve() {
    data.seed = seed;
    train.seed = seed;
    train.mining.seed = seed;
    train.mining.mode = train.loss.mode;
    if (train.epochs <= 0)
        train.epochs = train.loss.mode == SimilarityMode::Symmetric ? 100 : 300;
    if (train.learning_rate < 0.0)
        train.learning_rate = published_learning_rate(train.loss.kind, train.loss.mode);
    train.loss.validate();
}

ExperimentConfig default_experiment_config() {
    ExperimentConfig cfg;
    cfg.train.loss = LossConfig::defaults(LossKind::Regression, SimilarityMode::Asymmetric);
    cfg.train.epochs = 0;          // resolved from the mode
    cfg.train.learning_rate = -1;  // resolved from the loss
    cfg.resolve();
    return cfg;
}

double desk_learning_rate(LossKind kind, SimilarityMode mode) {
    switch (kind) {
        case LossKind::Contrastive:
        case LossKind::ContrastivePlus:
            return mode == SimilarityMode::Symmetric ? 0.02 : 0.05;
        case LossKind::Triplet:
        case LossKind::MultiSimilarity:
            return 2e-7;  // preserves the published eta_triplet / eta_contr ratio
        case LossKind::Regression:
            return 0.05;
        case LossKind::RKD:
            return 0.5;
        case LossKind::DarkRank:
            return 2e-5;
    }
    throw ConfigError("unknown loss kind");
}

ExperimentConfig desk_scale_config(LossKind kind, uint64_t seed) {
    ExperimentConfig cfg;
    const SimilarityMode mode =
        kind == LossKind::RKD || kind == LossKind::DarkRank ? SimilarityMode::Symmetric
                                                            : SimilarityMode::Asymmetric;
    cfg.train.loss = LossConfig::defaults(kind, mode);
    cfg.seed = seed;
    cfg.train.tuples_per_epoch = 200;
    cfg.train.epochs = cfg.train.loss.mode == SimilarityMode::Symmetric ? 50 : 150;
    cfg.train.learning_rate = desk_learning_rate(kind, cfg.train.loss.mode);
    cfg.train.mining.pool_size = 1000;
    cfg.train.mining.k_negatives = 5;
    cfg.resolve();
    return cfg;
}

namespace {

json loss_to_json(const LossConfig& l) {
    return json{{"kind", to_string(l.kind)},
                {"mode", to_string(l.mode)},
                {"margin", l.margin},
                {"alpha", l.alpha},
                {"beta", l.beta},
                {"include_self_positive", l.include_self_positive},
                {"use_positives", l.use_positives},
                {"use_negatives", l.use_negatives},
                {"rkd",
                 {{"distance_weight", l.rkd.distance_weight},
                  {"angle_weight", l.rkd.angle_weight},
                  {"huber_delta", l.rkd.huber_delta},
                  {"normalize_distances", l.rkd.normalize_distances},
                  {"identity_regression", l.rkd.identity_regression}}}};
}

void loss_from_json(const json& j, LossConfig& l) {
    if (j.contains("kind")) l.kind = loss_kind_from_string(j.at("kind").get<std::string>());
    if (j.contains("mode")) l.mode = mode_from_string(j.at("mode").get<std::string>());
    if (l.kind == LossKind::ContrastivePlus) {
        l = LossConfig::defaults(LossKind::ContrastivePlus, SimilarityMode::Asymmetric);
    } else if (l.kind == LossKind::Regression) {
        l.mode = SimilarityMode::Asymmetric;
    }
    if (j.contains("margin")) l.margin = j.at("margin").get<double>();
    if (j.contains("alpha")) l.alpha = j.at("alpha").get<double>();
    if (j.contains("beta")) l.beta = j.at("beta").get<double>();
    if (j.contains("include_self_positive") && l.kind != LossKind::ContrastivePlus)
        l.include_self_positive = j.at("include_self_positive").get<bool>();
    if (j.contains("use_positives") && l.kind != LossKind::ContrastivePlus)
        l.use_positives = j.at("use_positives").get<bool>();
    if (j.contains("use_negatives") && l.kind != LossKind::ContrastivePlus)
        l.use_negatives = j.at("use_negatives").get<bool>();
    if (j.contains("rkd")) {
        const json& r = j.at("rkd");
        if (r.contains("distance_weight")) l.rkd.distance_weight = r.at("distance_weight").get<double>();
        if (r.contains("angle_weight")) l.rkd.angle_weight = r.at("angle_weight").get<double>();
        if (r.contains("huber_delta")) l.rkd.huber_delta = r.at("huber_delta").get<double>();
        if (r.contains("normalize_distances"))
            l.rkd.normalize_distances = r.at("normalize_distances").get<bool>();
        if (r.contains("identity_regression"))
            l.rkd.identity_regression = r.at("identity_regression").get<bool>();
    }
}

void apply_layer(const json& j, ExperimentConfig& cfg) {
    if (j.contains("dataset")) {
        const json& d = j.at("dataset");
        if (d.contains("num_classes")) cfg.data.num_classes = d.at("num_classes").get<int>();
        if (d.contains("train_size")) cfg.data.train_size = d.at("train_size").get<int>();
        if (d.contains("db_size")) cfg.data.db_size = d.at("db_size").get<int>();
        if (d.contains("num_queries")) cfg.data.num_queries = d.at("num_queries").get<int>();
        if (d.contains("d_in")) cfg.data.d_in = d.at("d_in").get<int>();
        if (d.contains("d_teacher")) cfg.data.d_teacher = d.at("d_teacher").get<int>();
        if (d.contains("intra_class_noise"))
            cfg.data.intra_class_noise = d.at("intra_class_noise").get<double>();
        if (d.contains("teacher_signal")) cfg.data.teacher_signal = d.at("teacher_signal").get<double>();
    }
    if (j.contains("loss")) loss_from_json(j.at("loss"), cfg.train.loss);
    if (j.contains("train")) {
        const json& t = j.at("train");
        if (t.contains("learning_rate")) cfg.train.learning_rate = t.at("learning_rate").get<double>();
        if (t.contains("lr_decay")) cfg.train.lr_decay = t.at("lr_decay").get<double>();
        if (t.contains("weight_decay")) cfg.train.weight_decay = t.at("weight_decay").get<double>();
        if (t.contains("epochs")) cfg.train.epochs = t.at("epochs").get<int>();
        if (t.contains("tuples_per_epoch")) cfg.train.tuples_per_epoch = t.at("tuples_per_epoch").get<int>();
        if (t.contains("batch_tuples")) cfg.train.batch_tuples = t.at("batch_tuples").get<int>();
        if (t.contains("positives_per_tuple"))
            cfg.train.positives_per_tuple = t.at("positives_per_tuple").get<int>();
        if (t.contains("negatives_per_tuple"))
            cfg.train.negatives_per_tuple = t.at("negatives_per_tuple").get<int>();
        if (t.contains("unlabeled_per_tuple"))
            cfg.train.unlabeled_per_tuple = t.at("unlabeled_per_tuple").get<int>();
        if (t.contains("validation_fraction"))
            cfg.train.validation_fraction = t.at("validation_fraction").get<double>();
        if (t.contains("patience")) cfg.train.patience = t.at("patience").get<int>();
    }
    if (j.contains("mining")) {
        const json& m = j.at("mining");
        if (m.contains("pool_size")) cfg.train.mining.pool_size = m.at("pool_size").get<int>();
        if (m.contains("k_negatives")) cfg.train.mining.k_negatives = m.at("k_negatives").get<int>();
        if (m.contains("strict_class_exclusion"))
            cfg.train.mining.strict_class_exclusion = m.at("strict_class_exclusion").get<bool>();
    }
    if (j.contains("protocol")) cfg.protocol = protocol_from_string(j.at("protocol").get<std::string>());
    if (j.contains("seed")) cfg.seed = j.at("seed").get<uint64_t>();
    if (j.contains("data_dir")) cfg.data_dir = j.at("data_dir").get<std::string>();
    if (j.contains("out_dir")) cfg.out_dir = j.at("out_dir").get<std::string>();
    if (j.contains("threads")) cfg.threads = j.at("threads").get<int>();
    if (j.contains("strict_determinism")) cfg.strict_determinism = j.at("strict_determinism").get<bool>();
}

}  // namespace

ExperimentConfig config_from_json_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config parse error: ") + e.what());
    }
    ExperimentConfig cfg = default_experiment_config();
    try {
        if (j.contains("defaults") || j.contains("overrides")) {
            if (j.contains("defaults")) apply_layer(j.at("defaults"), cfg);
            if (j.contains("overrides")) apply_layer(j.at("overrides"), cfg);
        } else {
            apply_layer(j, cfg);
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config field error: ") + e.what());
    }
    cfg.resolve();
    return cfg;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
    return config_from_json_text(read_text_file(path));
}

std::string config_to_json_text(const ExperimentConfig& cfg) {
    json j;
    j["dataset"] = {{"num_classes", cfg.data.num_classes},
                    {"train_size", cfg.data.train_size},
                    {"db_size", cfg.data.db_size},
                    {"num_queries", cfg.data.num_queries},
                    {"d_in", cfg.data.d_in},
                    {"d_teacher", cfg.data.d_teacher},
                    {"intra_class_noise", cfg.data.intra_class_noise},
                    {"teacher_signal", cfg.data.teacher_signal}};
    j["loss"] = loss_to_json(cfg.train.loss);
    j["train"] = {{"learning_rate", cfg.train.learning_rate},
                  {"lr_decay", cfg.train.lr_decay},
                  {"weight_decay", cfg.train.weight_decay},
                  {"epochs", cfg.train.epochs},
                  {"tuples_per_epoch", cfg.train.tuples_per_epoch},
                  {"batch_tuples", cfg.train.batch_tuples},
                  {"positives_per_tuple", cfg.train.positives_per_tuple},
                  {"negatives_per_tuple", cfg.train.negatives_per_tuple},
                  {"unlabeled_per_tuple", cfg.train.unlabeled_per_tuple},
                  {"validation_fraction", cfg.train.validation_fraction},
                  {"patience", cfg.train.patience}};
    j["mining"] = {{"pool_size", cfg.train.mining.pool_size},
                   {"k_negatives", cfg.train.mining.k_negatives},
                   {"strict_class_exclusion", cfg.train.mining.strict_class_exclusion}};
    j["protocol"] = to_string(cfg.protocol);
    j["seed"] = cfg.seed;
    j["data_dir"] = cfg.data_dir;
    j["out_dir"] = cfg.out_dir;
    j["threads"] = cfg.threads;
    j["strict_determinism"] = cfg.strict_determinism;
    return j.dump(2) + "\n";
}

std::string config_digest(const ExperimentConfig& cfg) {
    const std::string text = config_to_json_text(cfg);
    return to_hex(fnv1a64(text.data(), text.size()));
}

void run_gen_data(const ExperimentConfig& cfg) {
    const SyntheticDataset ds = generate_synthetic(cfg.data);
    save_dataset(cfg.data_dir, ds);
    const TeacherModel teacher = build_synthetic_teacher(ds);
    save_teacher(std::filesystem::path(cfg.data_dir) / "teacher.f32", teacher);
}

TrainOutputs run_train(const ExperimentConfig& cfg) {
    const SyntheticDataset ds = load_dataset(cfg.data_dir);
    const auto teacher_path = std::filesystem::path(cfg.data_dir) / "teacher.f32";
    if (!std::filesystem::exists(teacher_path))
        throw ConfigError("missing teacher table: " + teacher_path.string());
    const TeacherModel teacher = load_teacher(teacher_path);

    const StudentModel init(make_default_arch(cfg.data.d_in, teacher.dim()), mix_seed(cfg.seed, 3));
    TrainResult result = train(ds.train, teacher, init, cfg.train);

    TrainOutputs out;
    out.checkpoint_dir = cfg.out_dir;
    out.log_path = std::filesystem::path(cfg.out_dir) / "train_log.csv";
    StudentModel best(init.arch(), result.best_theta);
    save_student(out.checkpoint_dir, best, cfg.seed, result.best_epoch);
    write_text_file(out.log_path, training_log_csv(result.log));
    out.result = std::move(result);
    return out;
}

std::string results_row(const EvalReport& report, const ExperimentConfig& cfg,
                        const std::string& timestamp) {
    char buf[256];
    std::snprintf(buf, sizeof(buf), "%s,%s,%s,%s,%.6f,%.6f,%llu,%s", timestamp.c_str(),
                  to_string(report.protocol).c_str(), to_string(cfg.train.loss.kind).c_str(),
                  to_string(cfg.train.loss.mode).c_str(), report.map, report.mp10,
                  static_cast<unsigned long long>(cfg.seed), report.config_digest.c_str());
    return buf;
}

EvalOutputs run_eval(const ExperimentConfig& cfg, const std::filesystem::path& checkpoint_dir,
                     Protocol protocol) {
    const SyntheticDataset ds = load_dataset(cfg.data_dir);
    const TeacherModel teacher = load_teacher(std::filesystem::path(cfg.data_dir) / "teacher.f32");
    auto [student, ckpt] = load_student(checkpoint_dir);

    const WhiteningTransform whitening = fit_whitening_for(protocol, student, teacher, ds.train);
    EvalOutputs out;
    out.report = evaluate(protocol, student, teacher, ds.task, whitening, config_digest(cfg));
    out.results_path = std::filesystem::path(cfg.out_dir) / "results.csv";

    std::string contents;
    if (std::filesystem::exists(out.results_path)) contents = read_text_file(out.results_path);
    if (contents.empty()) contents = kResultsHeader;
    std::string timestamp;
    if (!cfg.strict_determinism) {
        char ts[32];
        const std::time_t now = std::time(nullptr);
        std::strftime(ts, sizeof(ts), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
        timestamp = ts;
    }
    contents += results_row(out.report, cfg, timestamp) + "\n";
    write_text_file(out.results_path, contents);
    return out;
}

RunSummary run_pipeline(const ExperimentConfig& cfg) {
    const SyntheticDataset ds = generate_synthetic(cfg.data);
    const TeacherModel teacher = build_synthetic_teacher(ds);
    const StudentModel init(make_default_arch(cfg.data.d_in, teacher.dim()), mix_seed(cfg.seed, 3));
    const TrainResult result = train(ds.train, teacher, init, cfg.train);
    const StudentModel best(init.arch(), result.best_theta);

    RunSummary summary;
    summary.best_val = result.best_val;
    summary.best_epoch = result.best_epoch;
    const auto sym = evaluate(Protocol::Symmetric, best, teacher, ds.task,
                              fit_whitening_for(Protocol::Symmetric, best, teacher, ds.train));
    const auto asym = evaluate(Protocol::Asymmetric, best, teacher, ds.task,
                               fit_whitening_for(Protocol::Asymmetric, best, teacher, ds.train));
    summary.sym_map = sym.map;
    summary.sym_mp10 = sym.mp10;
    summary.asym_map = asym.map;
    summary.asym_mp10 = asym.mp10;
    return summary;
}

double teacher_symmetric_map(const SyntheticDataset& ds, const TeacherModel& teacher) {
    // Queries and database both embedded by the teacher; whitening in teacher space.
    WhiteningTransform whitening;
    {
        std::vector<Vec> embeddings;
        std::unordered_map<int, size_t> index;
        for (int id : ds.train.ids) {
            index.emplace(id, embeddings.size());
            embeddings.push_back(teacher.embed(id));
        }
        std::vector<std::pair<size_t, size_t>> pairs;
        for (int a : ds.train.ids)
            for (int p : ds.train.positives_of(a)) pairs.emplace_back(index.at(a), index.at(p));
        whitening = fit_whitening(embeddings, pairs, WhiteningSpace::Teacher);
    }
    std::vector<std::pair<int, Vec>> database;
    for (const auto& [id, input] : ds.task.database) {
        (void)input;
        database.emplace_back(id, apply_whitening(whitening, teacher.embed(id)));
    }
    double ap_sum = 0.0;
    int counted = 0;
    for (const auto& [qid, input] : ds.task.queries) {
        (void)input;
        auto pit = ds.task.positives.find(qid);
        if (pit == ds.task.positives.end() || pit->second.empty()) continue;
        const std::set<int> positives(pit->second.begin(), pit->second.end());
        const Vec q = apply_whitening(whitening, teacher.embed(qid));
        ap_sum += average_precision(rank_database(q, database, {}), positives);
        ++counted;
    }
    return counted > 0 ? ap_sum / counted : 0.0;
}

}  // namespace asymkd
