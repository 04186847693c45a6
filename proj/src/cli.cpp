#include "ksyn/cli.hpp"

#include <filesystem>
#include <iostream>
#include <limits>
#include <map>
#include <sstream>

#include <CLI11.hpp>
#include <Eigen/Geometry>

#include "ksyn/errors.hpp"
#include "ksyn/evaluation.hpp"
#include "ksyn/io.hpp"
#include "ksyn/svg.hpp"

namespace fs = std::filesystem;

namespace ksyn {

namespace {

constexpr const char* kSchemaVersions =
    "hand_model.v1 synergy.v1 gmm.v1 kmp.v1 grasp.v1 frames.v1 scene.v1 task.v1 svm.v1";

struct ParamOverrides {
    std::map<std::string, double> values;

    double get(const std::string& key, double fallback) const {
        const auto it = values.find(key);
        return it == values.end() ? fallback : it->second;
    }
};

ParamOverrides parse_params(const std::vector<std::string>& raw) {
    ParamOverrides out;
    for (const auto& entry : raw) {
        const auto eq = entry.find('=');
        if (eq == std::string::npos || eq == 0)
            throw InvalidInput("--params entries must be key=value, got '" + entry + "'");
        try {
            std::size_t used = 0;
            const double v = std::stod(entry.substr(eq + 1), &used);
            if (used != entry.size() - eq - 1) throw std::invalid_argument(entry);
            out.values[entry.substr(0, eq)] = v;
        } catch (const std::exception&) {
            throw InvalidInput("--params value for '" + entry.substr(0, eq) + "' is not numeric");
        }
    }
    return out;
}

PerceptionParams perception_params(const ParamOverrides& params) {
    PerceptionParams p;
    p.voxel_leaf = params.get("perception.leaf", p.voxel_leaf);
    p.ransac_iters = static_cast<int>(params.get("perception.ransac_iters", p.ransac_iters));
    p.ransac_dist = params.get("perception.ransac_dist", p.ransac_dist);
    p.cluster_epsilon = params.get("perception.epsilon", p.cluster_epsilon);
    p.cluster_min_pts = static_cast<int>(params.get("perception.min_pts", p.cluster_min_pts));
    p.reject_threshold = params.get("perception.reject_threshold", p.reject_threshold);
    return p;
}

// ---------------------------------------------------------------------------

int cmd_teach(const fs::path& demos_path, int components, const fs::path& out_path,
              bool mean_center) {
    const auto demos = load_demos_csv(demos_path);
    if (demos.empty()) throw InvalidInput("no demonstrations in " + demos_path.string());
    // q0: nominal posture of the default hand; overridable via a model flag
    // is not needed for batch runs because demos are recorded around it.
    const HandModel hand = HandModel::default_model();
    const ConfigurationMatrix c = build_config_matrix(demos, hand.nominal_posture);
    const SynergySubspace sub = extract_synergies(c, components, mean_center);
    sub.save(out_path);
    std::cout << "components: " << sub.components() << "\n";
    std::cout << "component,singular_value,explained_variance_ratio\n";
    for (int i = 0; i < sub.components(); ++i)
        std::cout << (i + 1) << "," << format_double(sub.singular_values[i]) << ","
                  << format_double(sub.explained_variance_ratio[i]) << "\n";
    return 0;
}

std::vector<ViaPoint> parse_via_flags(const std::vector<std::string>& raw, int s) {
    std::vector<ViaPoint> out;
    for (const auto& flag : raw) {
        std::vector<double> values;
        std::stringstream ss(flag);
        std::string field;
        while (std::getline(ss, field, ',')) {
            try {
                std::size_t used = 0;
                values.push_back(std::stod(field, &used));
                if (used != field.size()) throw std::invalid_argument(field);
            } catch (const std::exception&) {
                throw InvalidInput("via/end flag '" + flag + "': non-numeric field '" + field + "'");
            }
        }
        // t, S means, then 1 (isotropic) or S (diagonal) covariance entries.
        if (values.size() != static_cast<std::size_t>(1 + s + 1) &&
            values.size() != static_cast<std::size_t>(1 + 2 * s))
            throw InvalidInput("via/end flag '" + flag + "': expected t," + std::to_string(s) +
                               " means and 1 or " + std::to_string(s) + " covariance values");
        ViaPoint v;
        v.t = values[0];
        v.mean = Vec(s);
        for (int i = 0; i < s; ++i) v.mean[i] = values[static_cast<std::size_t>(i) + 1];
        v.cov = Mat::Identity(s, s);
        if (values.size() == static_cast<std::size_t>(1 + s + 1)) {
            v.cov *= values.back();
        } else {
            for (int i = 0; i < s; ++i) v.cov(i, i) = values[static_cast<std::size_t>(1 + s + i)];
        }
        out.push_back(std::move(v));
    }
    return out;
}

int cmd_adapt(const fs::path& input, const std::vector<std::string>& via_flags,
              const std::vector<std::string>& end_flags, const fs::path& out_model,
              const fs::path& out_traj, std::uint64_t seed, const ParamOverrides& params) {
    GmmModel gmm;
    double t_min = 0.0, t_max = 0.0;
    if (input.extension() == ".csv") {
        const SynergyTrajectory traj = SynergyTrajectory::load_csv(input);
        gmm = fit_gmm({traj}, static_cast<int>(params.get("gmm.components", 5)), seed);
        t_min = traj.t.front();
        t_max = traj.t.back();
    } else {
        gmm = GmmModel::load(input);
        // Cover the mixture's time support: component means +/- 2 sigma.
        t_min = std::numeric_limits<double>::infinity();
        t_max = -t_min;
        for (int k = 0; k < gmm.components(); ++k) {
            const double spread = 2.0 * std::sqrt(gmm.covs[static_cast<std::size_t>(k)](0, 0));
            t_min = std::min(t_min, gmm.means[static_cast<std::size_t>(k)][0] - spread);
            t_max = std::max(t_max, gmm.means[static_cast<std::size_t>(k)][0] + spread);
        }
    }
    const int s = gmm.synergy_dim();

    const int grid = static_cast<int>(params.get("kmp.reference_points", 100));
    if (!(t_max > t_min)) {
        t_min -= 0.5;
        t_max += 0.5;
    }
    std::vector<double> times(static_cast<std::size_t>(grid));
    for (int k = 0; k < grid; ++k)
        times[static_cast<std::size_t>(k)] = t_min + (t_max - t_min) * k / (grid - 1.0);

    KmpParams kp;
    kp.lambda = params.get("kmp.lambda", kp.lambda);
    kp.lambda_cov = params.get("kmp.lambda_cov", kp.lambda_cov);
    kp.length_scale = params.get("kmp.length_scale", 0.0);
    KmpModel kmp = build_reference(gmm, times, kp);

    const auto vias = parse_via_flags(via_flags, s);
    auto ends = parse_via_flags(end_flags, s);
    for (const auto& v : vias) kmp = insert_via_point(kmp, v.t, v.mean, v.cov);
    for (const auto& v : ends) kmp = insert_via_point(kmp, v.t, v.mean, v.cov);
    kmp.save(out_model);

    SynergyTrajectory out;
    out.t = times;
    out.e.resize(static_cast<Eigen::Index>(times.size()), s);
    if (vias.empty() && ends.empty()) {
        // No adaptation requested: the trajectory is the GMR reference.
        for (std::size_t k = 0; k < times.size(); ++k)
            out.e.row(static_cast<Eigen::Index>(k)) =
                kmp.reference[k].mean.transpose();
    } else {
        for (std::size_t k = 0; k < times.size(); ++k)
            out.e.row(static_cast<Eigen::Index>(k)) = kmp_predict(kmp, times[k]).mean.transpose();
    }
    out.save_csv(out_traj);
    std::cout << "reference points: " << kmp.reference.size() << ", via/end points applied: "
              << vias.size() + ends.size() << "\n";
    return 0;
}

int cmd_detect(const fs::path& scene_pcd, const fs::path& svm_path, const fs::path& frames_path,
               const fs::path& out_csv, std::uint64_t seed, const ParamOverrides& params) {
    const PointCloud cloud = load_pcd(scene_pcd);
    const SvmModel svm = SvmModel::load(svm_path);
    const FrameCalibration frames = FrameCalibration::load(frames_path);
    const auto detections = detect_objects(cloud, svm, frames, seed, perception_params(params));

    std::ofstream out(out_csv);
    if (!out) throw DataError("cannot write " + out_csv.string());
    out << "label,confidence,cluster_size,x,y,z,qw,qx,qy,qz\n";
    for (const auto& d : detections) {
        const Eigen::Quaterniond q(d.pose_base.rotation);
        out << d.label << "," << format_double(d.confidence) << "," << d.cluster_size << ","
            << format_double(d.pose_base.translation.x()) << ","
            << format_double(d.pose_base.translation.y()) << ","
            << format_double(d.pose_base.translation.z()) << "," << format_double(q.w()) << ","
            << format_double(q.x()) << "," << format_double(q.y()) << "," << format_double(q.z())
            << "\n";
    }
    if (detections.empty())
        std::cout << "no candidates\n";
    else
        std::cout << detections.size() << " detection(s)\n";
    return 0;
}

ReplayModels load_replay_models(const fs::path& hand, const fs::path& synergy, const fs::path& gmm,
                                const fs::path& svm, const fs::path& frames, std::uint64_t seed) {
    if (hand.empty() && synergy.empty() && gmm.empty() && svm.empty() && frames.empty())
        return default_replay_models(seed);
    ReplayModels models = default_replay_models(seed);
    if (!hand.empty()) models.hand = HandModel::load(hand);
    if (!synergy.empty()) models.subspace = SynergySubspace::load(synergy);
    if (!gmm.empty()) models.gmm = GmmModel::load(gmm);
    if (!svm.empty()) models.scene_svm = SvmModel::load(svm);
    if (!frames.empty()) models.frames = FrameCalibration::load(frames);
    return models;
}

int cmd_replay(const fs::path& task_path, const fs::path& scene_path, const fs::path& out_dir,
               const ReplayModels& models, std::uint64_t seed, const ParamOverrides& params) {
    const TaskScript script = TaskScript::load(task_path);
    const SceneSpec scene = SceneSpec::load(scene_path);
    fs::create_directories(out_dir);

    const TaskTrace trace = replay_task(script, scene, models, seed, perception_params(params));

    {
        std::ofstream out(out_dir / "detections.csv");
        out << "label,confidence,cluster_size,x,y,z\n";
        for (const auto& d : trace.detections)
            out << d.label << "," << format_double(d.confidence) << "," << d.cluster_size << ","
                << format_double(d.pose_base.translation.x()) << ","
                << format_double(d.pose_base.translation.y()) << ","
                << format_double(d.pose_base.translation.z()) << "\n";
    }
    if (trace.adapted.samples() > 0) trace.adapted.save_csv(out_dir / "adapted_trajectory.csv");
    if (!trace.grasp_trace.empty()) save_grasp_trace_csv(out_dir / "grasp_trace.csv", trace.grasp_trace);
    if (trace.manipulation.samples() > 0) trace.manipulation.save_csv(out_dir / "manipulation.csv");

    nlohmann::json result;
    result["task"] = script.name;
    result["success"] = trace.success;
    result["failure_stage"] = trace.failure_stage;
    result["final_force_n"] = trace.final_force;
    if (trace.final_coeffs.size() > 0) result["final_coefficients"] = to_json(trace.final_coeffs);
    write_text_file(out_dir / "result.json", result.dump(2) + "\n");

    std::cout << (trace.success ? "success" : "failure (" + trace.failure_stage + ")") << "\n";
    if (!trace.success) throw TaskFailure("task '" + script.name + "' failed at stage '" +
                                          trace.failure_stage + "'");
    return 0;
}

int cmd_eval(const std::vector<std::string>& methods, const std::vector<int>& components,
             const fs::path& out_dir, std::uint64_t seed, const ParamOverrides& params) {
    fs::create_directories(out_dir);
    std::vector<std::string> method_names;
    for (const auto& m : methods) {
        if (m == "a" || m == "kernelized") method_names.push_back("kernelized");
        else if (m == "b" || m == "retrained_pca") method_names.push_back("retrained_pca");
        else if (m == "c" || m == "fixed_plus_appended") method_names.push_back("fixed_plus_appended");
        else throw InvalidInput("unknown method '" + m + "' (use a, b or c)");
    }
    const BenchmarkDataset dataset = generate_benchmark(BenchmarkParams{}, seed);
    CompareOptions options;
    options.seed = seed;
    options.pa_tolerance = params.get("eval.pa_tolerance", options.pa_tolerance);
    options.gmm_components = static_cast<int>(params.get("eval.gmm_components", options.gmm_components));
    const auto reports = compare_methods(dataset, method_names, components, options);
    save_report_csv(out_dir / "report.csv", reports);
    save_report_svg(out_dir / "report.svg", reports);
    for (const auto& r : reports)
        std::cout << r.method << " S=" << r.components << " nse=" << format_double(r.nse)
                  << " pa=" << format_double(r.pa) << "\n";
    return 0;
}

int cmd_gen_assets(const fs::path& out_dir, std::uint64_t seed) {
    fs::create_directories(out_dir / "tasks");
    fs::create_directories(out_dir / "scenes");

    const ReplayModels models = default_replay_models(seed);
    models.hand.save(out_dir / "hand_model.v1");
    models.subspace.save(out_dir / "synergy.v1");
    models.gmm.save(out_dir / "gmm.v1");
    models.scene_svm.save(out_dir / "svm_scene.v1");
    models.frames.save(out_dir / "frames.v1");

    // Demonstration CSV (pooled training demos of the synthetic benchmark).
    const BenchmarkDataset dataset = generate_benchmark(BenchmarkParams{}, seed);
    std::vector<JointConfig> pooled;
    for (const auto& obj : dataset.train)
        for (const auto& rep : obj.replicates)
            for (const auto& q : rep) pooled.push_back(q);
    save_demos_csv(out_dir / "demos.csv", pooled);

    for (const auto& script : default_task_scripts()) {
        script.save(out_dir / "tasks" / (script.name + ".task.v1"));
        const SceneSpec scene = default_task_scene(script.name);
        scene.save(out_dir / "scenes" / (script.name + ".scene.v1"));
    }
    std::cout << "assets written to " << out_dir.string() << "\n";
    return 0;
}

int cmd_gen_scene(const fs::path& spec_path, const fs::path& out_pcd, const fs::path& frames_path,
                  std::uint64_t seed) {
    const SceneSpec spec = SceneSpec::load(spec_path);
    GeneratedScene scene = generate_scene(spec, seed);
    if (!frames_path.empty()) {
        const FrameCalibration frames = FrameCalibration::load(frames_path);
        const Pose base_to_camera = frames.camera_to_base().inverse();
        for (auto& p : scene.cloud.points) {
            const Vec3 q = base_to_camera.apply(p.xyz());
            p.x = q.x();
            p.y = q.y();
            p.z = q.z();
        }
    }
    save_pcd(out_pcd, scene.cloud);
    std::cout << scene.cloud.size() << " points"
              << (scene.truth.overlap_warning ? " (warning: overlapping objects)" : "") << "\n";
    return 0;
}

} // namespace

int run_cli(const std::vector<std::string>& args) {
    CLI::App app{"kernelized-synergies grasping toolkit"};
    app.require_subcommand(0, 1);
    app.fallthrough(true);

    std::uint64_t seed = 0;
    std::vector<std::string> raw_params;
    bool show_version = false;
    app.add_option("--seed", seed, "seed for every random draw (default 0)");
    app.add_option("--params", raw_params, "module parameter overrides, key=value")
        ->take_all();
    app.add_flag("--version", show_version, "print model-file schema versions");

    // teach
    auto* teach = app.add_subcommand("teach", "extract a synergy subspace from demonstrations");
    std::string teach_demos, teach_out = "synergy.v1";
    int teach_components = 2;
    bool teach_mean_center = false;
    teach->add_option("demos", teach_demos, "CSV with header t,q1,...,q6")->required();
    teach->add_option("--components", teach_components, "number of components (default 2)");
    teach->add_option("--out", teach_out, "output model file");
    teach->add_flag("--mean-center", teach_mean_center, "center at the dataset mean instead of q0");

    // adapt
    auto* adapt = app.add_subcommand("adapt", "build and adapt a kernel trajectory predictor");
    std::string adapt_input, adapt_out_model = "kmp.v1", adapt_out_traj = "trajectory.csv";
    std::vector<std::string> adapt_via, adapt_end;
    adapt->add_option("input", adapt_input, "gmm.v1 model or trajectory CSV (t,e1,...,eS)")
        ->required();
    adapt->add_option("--via", adapt_via, "via-point: t,mean...,cov (repeatable)")->take_all();
    adapt->add_option("--end", adapt_end, "end-point: t,mean...,cov (repeatable)")->take_all();
    adapt->add_option("--out", adapt_out_model, "output KMP model file");
    adapt->add_option("--trajectory", adapt_out_traj, "output trajectory CSV");

    // detect
    auto* detect = app.add_subcommand("detect", "detect objects in a point cloud");
    std::string detect_scene, detect_svm, detect_frames, detect_out = "detections.csv";
    detect->add_option("scene", detect_scene, "ASCII PCD scene (camera frame)")->required();
    detect->add_option("--svm", detect_svm, "svm.v1 recognition model")->required();
    detect->add_option("--frames", detect_frames, "frames.v1 calibration")->required();
    detect->add_option("--out", detect_out, "output CSV");

    // replay
    auto* replay = app.add_subcommand("replay", "replay a scripted task on a synthetic scene");
    std::string replay_task_path, replay_scene, replay_out = "trace";
    std::string replay_hand, replay_synergy, replay_gmm, replay_svm, replay_frames;
    replay->add_option("task", replay_task_path, "task.v1 script")->required();
    replay->add_option("scene", replay_scene, "scene.v1 spec")->required();
    replay->add_option("--out", replay_out, "output directory");
    replay->add_option("--hand", replay_hand, "hand_model.v1 (default: built-in)");
    replay->add_option("--synergy", replay_synergy, "synergy.v1 (default: derived from seed)");
    replay->add_option("--gmm", replay_gmm, "gmm.v1 (default: derived from seed)");
    replay->add_option("--svm", replay_svm, "svm.v1 (default: derived from seed)");
    replay->add_option("--frames", replay_frames, "frames.v1 (default: built-in)");

    // eval
    auto* eval = app.add_subcommand("eval", "run the method comparison benchmark");
    std::vector<std::string> eval_methods = {"a", "b", "c"};
    std::string eval_components = "2:6";
    std::string eval_out = "report";
    eval->add_option("--methods", eval_methods, "methods: a, b, c")->delimiter(',');
    eval->add_option("--components", eval_components, "component counts, lo:hi or comma list");
    eval->add_option("--out", eval_out, "output directory");

    // gen
    auto* gen = app.add_subcommand("gen", "generate assets, scenes and models");
    auto* gen_assets = gen->add_subcommand("assets", "write the default model/task/scene kit");
    std::string gen_assets_out = "assets";
    gen_assets->add_option("--out", gen_assets_out, "output directory");
    auto* gen_scene = gen->add_subcommand("scene", "render a scene spec to an ASCII PCD");
    std::string gen_scene_spec, gen_scene_out = "scene.pcd", gen_scene_frames;
    gen_scene->add_option("spec", gen_scene_spec, "scene.v1 spec")->required();
    gen_scene->add_option("--out", gen_scene_out, "output PCD path");
    gen_scene->add_option("--frames", gen_scene_frames,
                          "frames.v1; when given, emit the cloud in the camera frame");

    std::vector<const char*> argv;
    argv.push_back("ksyn");
    for (const auto& a : args) argv.push_back(a.c_str());

    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (show_version) {
            std::cout << kSchemaVersions << "\n";
            return 0;
        }
        const ParamOverrides params = parse_params(raw_params);
        if (teach->parsed()) return cmd_teach(teach_demos, teach_components, teach_out, teach_mean_center);
        if (adapt->parsed())
            return cmd_adapt(adapt_input, adapt_via, adapt_end, adapt_out_model, adapt_out_traj,
                             seed, params);
        if (detect->parsed())
            return cmd_detect(detect_scene, detect_svm, detect_frames, detect_out, seed, params);
        if (replay->parsed()) {
            const ReplayModels models = load_replay_models(replay_hand, replay_synergy, replay_gmm,
                                                           replay_svm, replay_frames, seed);
            return cmd_replay(replay_task_path, replay_scene, replay_out, models, seed, params);
        }
        if (eval->parsed()) {
            std::vector<int> counts;
            std::string spec = eval_components;
            const auto colon = spec.find(':');
            if (colon != std::string::npos) {
                const int lo = std::stoi(spec.substr(0, colon));
                const int hi = std::stoi(spec.substr(colon + 1));
                for (int m = lo; m <= hi; ++m) counts.push_back(m);
            } else {
                std::stringstream ss(spec);
                std::string field;
                while (std::getline(ss, field, ',')) counts.push_back(std::stoi(field));
            }
            return cmd_eval(eval_methods, counts, eval_out, seed, params);
        }
        if (gen->parsed()) {
            if (gen_assets->parsed()) return cmd_gen_assets(gen_assets_out, seed);
            if (gen_scene->parsed())
                return cmd_gen_scene(gen_scene_spec, gen_scene_out, gen_scene_frames, seed);
            throw InvalidInput("gen needs a subcommand (assets or scene)");
        }
        std::cout << app.help();
        return 0;
    } catch (const InvalidInput& e) {
        std::cerr << "error (invalid input): " << e.what() << "\n";
        return 2;
    } catch (const DataError& e) {
        std::cerr << "error (data): " << e.what() << "\n";
        return 3;
    } catch (const NumericError& e) {
        std::cerr << "error (numeric): " << e.what() << "\n";
        return 4;
    } catch (const TaskFailure& e) {
        std::cerr << "error (task): " << e.what() << "\n";
        return 5;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

} // namespace ksyn
