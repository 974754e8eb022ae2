// mdms: meter data management service and companion tools.
//
//   mdms serve   run the ingest service, scheduler and HTTP API
//   mdms replay  load a frame file (or stdin) into a store
//   mdms sim     simulate a household and emit frames plus a ground-truth file
//   mdms nilm    disaggregate a frame file offline
//   mdms score   compare ground truth against a NILM result (file or API)
//   mdms bill    price consumption under a tariff file

#include <CLI11.hpp>
#include <httplib.h>

#include <netdb.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <csignal>
#include <cstring>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include "mdms/error.hpp"
#include "mdms/ingest.hpp"
#include "mdms/json_io.hpp"
#include "mdms/log.hpp"
#include "mdms/service.hpp"
#include "mdms/sim.hpp"
#include "mdms/tariff.hpp"

namespace {

using namespace mdms;
using json_io::json;

volatile std::sig_atomic_t g_stop = 0;

void on_signal(int) { g_stop = 1; }

// "Pump:250" or "Pump:250:230"
sim::SimAppliance parse_appliance(const std::string& text) {
    const auto colon = text.find(':');
    if (colon == std::string::npos || colon == 0) {
        throw Error(ErrorCode::ValidationError, "appliance must be NAME:WATTS, got '" + text + "'");
    }
    sim::SimAppliance a;
    a.name = text.substr(0, colon);
    try {
        a.rated_power_w = std::stod(text.substr(colon + 1));
    } catch (const std::exception&) {
        throw Error(ErrorCode::ValidationError, "bad wattage in '" + text + "'");
    }
    return a;
}

std::vector<sim::SimAppliance> parse_appliances(const std::vector<std::string>& items) {
    if (items.empty()) {
        return sim::reference_appliances();
    }
    std::vector<sim::SimAppliance> out;
    for (const auto& s : items) {
        out.push_back(parse_appliance(s));
    }
    return out;
}

json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw Error(ErrorCode::InvalidConfig, "cannot open " + path);
    }
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw Error(ErrorCode::ValidationError, path + ": " + e.what());
    }
}

void add_nilm_options(CLI::App& app, nilm::NilmConfig& cfg) {
    app.add_option("--pwr-tol", cfg.pwr_tol, "Fractional tolerance around rated power")
        ->envname("MDMS_PWR_TOL");
    app.add_option("--trans-tol", cfg.trans_tol_w, "Settle threshold in watts")->envname("MDMS_TRANS_TOL");
    app.add_option("--win-len", cfg.win_len_default, "Default window offset in samples")
        ->envname("MDMS_WIN_LEN");
}

int run_serve(service::ServiceConfig cfg, const std::string& trigger, const std::string& offset,
              long poll_s, const std::string& replay) {
    const auto t = service::parse_time_of_day(trigger);
    const auto o = service::parse_utc_offset(offset);
    if (!t || !o) {
        throw Error(ErrorCode::InvalidConfig, "trigger must be HH:MM and day offset +HH:MM/-HH:MM/Z");
    }
    cfg.trigger_time = *t;
    cfg.day_offset = *o;
    cfg.scheduler_poll = std::chrono::seconds{poll_s};

    service::Service svc(cfg);
    svc.start();
    if (!replay.empty()) {
        std::ifstream file;
        std::istream* in = &std::cin;
        if (replay != "-") {
            file.open(replay);
            if (!file) {
                throw Error(ErrorCode::InvalidConfig, "cannot open " + replay);
            }
            in = &file;
        }
        ingest::run_ingest_loop(*in, svc.pipeline());
        svc.pipeline().flush();
    }
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    while (!g_stop) {
        std::this_thread::sleep_for(std::chrono::milliseconds(200));
    }
    svc.stop();
    return 0;
}

int run_replay(const std::string& store_path, const std::string& file, bool auto_register) {
    store::Store st(store_path);
    ingest::PipelineOptions opts;
    opts.auto_register = auto_register;
    ingest::IngestPipeline pipeline(st, opts);
    std::ifstream f;
    std::istream* in = &std::cin;
    if (file != "-") {
        f.open(file);
        if (!f) {
            throw Error(ErrorCode::InvalidConfig, "cannot open " + file);
        }
        in = &f;
    }
    ingest::run_ingest_loop(*in, pipeline);
    pipeline.stop();
    const auto s = pipeline.stats();
    std::cout << json{{"lines", s.lines},
                      {"stored", s.stored},
                      {"malformed", s.malformed},
                      {"duplicate", s.duplicate},
                      {"unknown_meter", s.unknown_meter}}
                     .dump(2)
              << '\n';
    return 0;
}

void send_over_tcp(const std::vector<MeterFrame>& frames, const std::string& target, bool realtime,
                   std::int64_t interval_s) {
    const auto colon = target.rfind(':');
    if (colon == std::string::npos || colon == 0) {
        throw Error(ErrorCode::InvalidConfig, "--connect expects HOST:PORT");
    }
    const auto host = target.substr(0, colon);
    const auto port = target.substr(colon + 1);

    addrinfo hints{};
    hints.ai_family = AF_UNSPEC;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* res = nullptr;
    if (getaddrinfo(host.c_str(), port.c_str(), &hints, &res) != 0 || !res) {
        throw Error(ErrorCode::InvalidConfig, "cannot resolve " + target);
    }
    int fd = -1;
    for (auto* ai = res; ai; ai = ai->ai_next) {
        fd = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
        if (fd >= 0 && ::connect(fd, ai->ai_addr, ai->ai_addrlen) == 0) {
            break;
        }
        if (fd >= 0) {
            ::close(fd);
            fd = -1;
        }
    }
    freeaddrinfo(res);
    if (fd < 0) {
        throw Error(ErrorCode::InvalidConfig, "cannot connect to " + target + ": " + std::strerror(errno));
    }

    auto write_all = [fd](const std::string& data) {
        std::size_t off = 0;
        while (off < data.size()) {
            const auto n = ::send(fd, data.data() + off, data.size() - off, MSG_NOSIGNAL);
            if (n < 0) {
                if (errno == EINTR) {
                    continue;
                }
                return false;
            }
            off += static_cast<std::size_t>(n);
        }
        return true;
    };

    std::string buffer;
    for (const auto& frame : frames) {
        buffer += serialize_frame(frame);
        buffer += '\n';
        if (realtime || buffer.size() >= 1 << 16) {
            if (!write_all(buffer)) {
                ::close(fd);
                throw Error(ErrorCode::InvalidConfig, std::string("send failed: ") + std::strerror(errno));
            }
            buffer.clear();
        }
        if (realtime) {
            std::this_thread::sleep_for(std::chrono::seconds{interval_s});
        }
    }
    const bool ok = write_all(buffer);
    ::close(fd);
    if (!ok) {
        throw Error(ErrorCode::InvalidConfig, std::string("send failed: ") + std::strerror(errno));
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Meter data management with sliding-window load disaggregation"};
    app.require_subcommand(1);

    // serve
    service::ServiceConfig serve_cfg;
    std::string trigger = "00:00";
    std::string day_offset = "Z";
    long poll_s = 30;
    std::string replay_file;
    auto* serve = app.add_subcommand("serve", "Run the MDMS service");
    serve->add_option("--frame-host", serve_cfg.frame_host, "Frame stream listen host")->envname("MDMS_FRAME_HOST");
    serve->add_option("--frame-port", serve_cfg.frame_port, "Frame stream listen port")->envname("MDMS_FRAME_PORT");
    serve->add_option("--http-host", serve_cfg.http_host, "HTTP API listen host")->envname("MDMS_HTTP_HOST");
    serve->add_option("--http-port", serve_cfg.http_port, "HTTP API listen port")->envname("MDMS_HTTP_PORT");
    serve->add_option("--store", serve_cfg.store_path, "SQLite database file")->envname("MDMS_STORE");
    serve->add_option("--tariff", serve_cfg.tariff_path, "Tariff config file")->envname("MDMS_TARIFF");
    serve->add_option("--trigger", trigger, "Local time of the end-of-day run (HH:MM)")->envname("MDMS_TRIGGER");
    serve->add_option("--day-offset", day_offset, "Local offset from UTC (+05:30, Z)")->envname("MDMS_DAY_OFFSET");
    serve->add_option("--scheduler-poll", poll_s, "Seconds between scheduler passes")->envname("MDMS_SCHEDULER_POLL");
    serve->add_option("--queue-capacity", serve_cfg.queue_capacity, "Ingest queue capacity (frames)")
        ->envname("MDMS_QUEUE_CAPACITY");
    serve->add_flag("--auto-register", serve_cfg.auto_register, "Register unknown meters on first frame")
        ->envname("MDMS_AUTO_REGISTER");
    serve->add_option("--replay", replay_file, "Also ingest this frame file ('-' for stdin) at startup");
    add_nilm_options(*serve, serve_cfg.nilm);

    // replay
    std::string replay_store = "mdms.db";
    std::string replay_input = "-";
    bool replay_auto = false;
    auto* replay = app.add_subcommand("replay", "Load frames from a file or stdin into a store");
    replay->add_option("--store", replay_store, "SQLite database file")->envname("MDMS_STORE");
    replay->add_option("input", replay_input, "Frame file, '-' for stdin");
    replay->add_flag("--auto-register", replay_auto, "Register unknown meters on first frame");

    // sim
    sim::SimScenario scenario;
    std::vector<std::string> sim_appliances;
    std::string sim_meter = "MTR001";
    std::string sim_out = "-";
    std::string sim_truth;
    std::string sim_connect;
    std::string sim_start;
    bool sim_realtime = false;
    auto* simc = app.add_subcommand("sim", "Simulate a household meter");
    simc->add_option("--seed", scenario.seed, "RNG seed");
    simc->add_option("--duration", scenario.duration_s, "Scenario length in seconds");
    simc->add_option("--interval", scenario.sample_interval_s, "Seconds between samples");
    simc->add_option("--noise", scenario.noise_w, "Uniform noise amplitude in watts");
    simc->add_option("--ramp", scenario.ramp_samples, "Max intermediate samples per switching event");
    simc->add_option("--min-gap", scenario.min_gap_samples, "Min samples between switching events");
    simc->add_option("--min-session", scenario.min_session_samples, "Min ON samples per session");
    simc->add_option("--voltage", scenario.voltage_v, "Nominal voltage");
    simc->add_option("--voltage-jitter", scenario.voltage_jitter_v, "Uniform voltage jitter amplitude");
    simc->add_option("--appliance", sim_appliances, "NAME:WATTS (repeatable; default reference set)");
    simc->add_option("--meter", sim_meter, "Meter id written into frames");
    simc->add_option("--start", sim_start, "First sample time (YYYY-MM-DDTHH:MM:SSZ)");
    simc->add_option("--out", sim_out, "Frame output file, '-' for stdout");
    simc->add_option("--truth", sim_truth, "Ground-truth JSON output file");
    simc->add_option("--connect", sim_connect, "Send frames to HOST:PORT instead of --out");
    simc->add_flag("--realtime", sim_realtime, "Pace frames at the sample interval when sending");

    // nilm
    std::string nilm_frames = "-";
    std::vector<std::string> nilm_appliances;
    nilm::NilmConfig nilm_cfg;
    auto* nilmc = app.add_subcommand("nilm", "Disaggregate a frame file offline");
    nilmc->add_option("input", nilm_frames, "Frame file, '-' for stdin");
    nilmc->add_option("--appliance", nilm_appliances, "NAME:WATTS (repeatable; default reference set)");
    add_nilm_options(*nilmc, nilm_cfg);

    // score
    std::string score_truth;
    std::string score_result;
    std::string score_api;
    std::string score_meter;
    std::string score_date;
    auto* score = app.add_subcommand("score", "Per-appliance duration error against ground truth");
    score->add_option("--truth", score_truth, "Ground-truth JSON")->required();
    score->add_option("--result", score_result, "NILM result JSON file");
    score->add_option("--api", score_api, "Service base URL, e.g. http://localhost:8080");
    score->add_option("--meter", score_meter, "Meter id (with --api)");
    score->add_option("--date", score_date, "Analysis date YYYY-MM-DD (with --api)");

    // bill
    std::string bill_tariff;
    double bill_energy = -1.0;
    std::vector<double> bill_daily;
    unsigned bill_days = 0;
    auto* bill = app.add_subcommand("bill", "Price consumption under a tariff");
    bill->add_option("--tariff", bill_tariff, "Tariff config file")->required();
    bill->add_option("--energy", bill_energy, "Energy in kWh to price");
    bill->add_option("--daily", bill_daily, "Daily kWh so far this period (predicts the period bill)")
        ->delimiter(',');
    bill->add_option("--days", bill_days, "Days in the billing period (with --daily)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*serve) {
            return run_serve(serve_cfg, trigger, day_offset, poll_s, replay_file);
        }
        if (*replay) {
            return run_replay(replay_store, replay_input, replay_auto);
        }
        if (*simc) {
            scenario.appliances = parse_appliances(sim_appliances);
            if (!sim_start.empty()) {
                const auto ts = parse_timestamp(sim_start);
                if (!ts) {
                    throw Error(ErrorCode::InvalidConfig, "--start must be YYYY-MM-DDTHH:MM:SSZ");
                }
                scenario.start = *ts;
            }
            const auto truth = sim::generate_schedule(scenario);
            const auto series = sim::synthesize_series(truth, scenario);
            const auto frames = sim::to_frames(series, sim_meter, scenario);
            if (!sim_truth.empty()) {
                std::ofstream(sim_truth) << json_io::to_json(truth).dump(2) << '\n';
            }
            if (!sim_connect.empty()) {
                send_over_tcp(frames, sim_connect, sim_realtime, scenario.sample_interval_s);
            } else if (sim_out == "-") {
                sim::emit_frames(frames, std::cout);
            } else {
                std::ofstream out(sim_out);
                sim::emit_frames(frames, out);
            }
            return 0;
        }
        if (*nilmc) {
            std::ifstream f;
            std::istream* in = &std::cin;
            if (nilm_frames != "-") {
                f.open(nilm_frames);
                if (!f) {
                    throw Error(ErrorCode::InvalidConfig, "cannot open " + nilm_frames);
                }
                in = &f;
            }
            nilm::PowerSeries series;
            std::size_t malformed = 0;
            for (std::string line; std::getline(*in, line);) {
                try {
                    const auto frame = parse_frame(line);
                    series.samples.push_back({frame.timestamp, frame.power_w});
                } catch (const Error&) {
                    ++malformed;
                }
            }
            if (series.size() >= 2) {
                series.sample_interval_s =
                    static_cast<double>((series.samples[1].time - series.samples[0].time).count());
            }
            sim::SimScenario s;
            s.appliances = parse_appliances(nilm_appliances);
            const auto result = nilm::detect_events(series, sim::detector_appliances(s), nilm_cfg);
            json out = json_io::to_json(result);
            out["malformed_lines"] = malformed;
            std::cout << out.dump(2) << '\n';
            return 0;
        }
        if (*score) {
            const auto truth = json_io::ground_truth_from_json(read_json_file(score_truth));
            nilm::NilmResult result;
            if (!score_result.empty()) {
                result = json_io::nilm_result_from_json(read_json_file(score_result));
            } else if (!score_api.empty()) {
                if (score_meter.empty() || score_date.empty()) {
                    throw Error(ErrorCode::InvalidConfig, "--api needs --meter and --date");
                }
                httplib::Client cli(score_api);
                const auto res = cli.Get("/meters/" + score_meter + "/nilm?from=" + score_date);
                if (!res || res->status != 200) {
                    throw Error(ErrorCode::InvalidConfig, "API request failed");
                }
                json records = json::parse(res->body).at("records");
                json shaped = {{"appliances", json::array()}};
                for (const auto& r : records) {
                    shaped["appliances"].push_back({{"name", r.at("appliance")}, {"duration_s", r.at("duration_s")}});
                }
                result = json_io::nilm_result_from_json(shaped);
            } else {
                throw Error(ErrorCode::InvalidConfig, "score needs --result or --api");
            }
            std::cout << json_io::to_json(sim::score_run(truth, result)).dump(2) << '\n';
            return 0;
        }
        if (*bill) {
            const auto schedule = tariff::load_schedule(bill_tariff);
            if (!bill_daily.empty()) {
                if (bill_days == 0) {
                    throw Error(ErrorCode::InvalidConfig, "--daily needs --days");
                }
                std::cout << json_io::to_json(tariff::predict_month(bill_daily, bill_days, schedule)).dump(2) << '\n';
            } else {
                if (bill_energy < 0) {
                    throw Error(ErrorCode::InvalidConfig, "bill needs --energy or --daily");
                }
                const double amount = tariff::compute_bill(bill_energy, schedule);
                std::cout << json{{"energy_kwh", bill_energy},
                                  {"amount", amount},
                                  {"amount_display", tariff::round_currency(amount)}}
                                 .dump(2)
                          << '\n';
            }
            return 0;
        }
    } catch (const Error& e) {
        std::cerr << "error: " << to_string(e.code()) << ": " << e.what() << '\n';
        return 2;
    }
    return 0;
}
