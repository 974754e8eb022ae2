#include "mdms/store.hpp"

#include <sqlite3.h>

#include <algorithm>

#include "mdms/error.hpp"

namespace mdms::store {

namespace {

constexpr const char* kSchema = R"sql(
CREATE TABLE IF NOT EXISTS "meter" (
    meter_id TEXT PRIMARY KEY
);
CREATE TABLE IF NOT EXISTS "load" (
    meter_id TEXT NOT NULL REFERENCES "meter"(meter_id) ON DELETE RESTRICT,
    name TEXT NOT NULL,
    rated_voltage_v REAL NOT NULL,
    rated_power_w REAL NOT NULL CHECK (rated_power_w > 0),
    rated_power_factor REAL NOT NULL,
    PRIMARY KEY (meter_id, name)
);
CREATE TABLE IF NOT EXISTS "store" (
    meter_id TEXT NOT NULL REFERENCES "meter"(meter_id) ON DELETE RESTRICT,
    ts INTEGER NOT NULL,
    voltage_v REAL NOT NULL,
    power_w REAL NOT NULL,
    PRIMARY KEY (meter_id, ts)
) WITHOUT ROWID;
CREATE TABLE IF NOT EXISTS "nilm" (
    meter_id TEXT NOT NULL,
    name TEXT NOT NULL,
    date TEXT NOT NULL,
    duration_s REAL NOT NULL CHECK (duration_s >= 0),
    energy_wh REAL NOT NULL,
    share REAL NOT NULL,
    sessions INTEGER NOT NULL,
    PRIMARY KEY (meter_id, name, date),
    FOREIGN KEY (meter_id, name) REFERENCES "load"(meter_id, name) ON DELETE RESTRICT
);
CREATE TABLE IF NOT EXISTS "daily_summary" (
    meter_id TEXT NOT NULL REFERENCES "meter"(meter_id) ON DELETE RESTRICT,
    date TEXT NOT NULL,
    energy_kwh REAL NOT NULL,
    unattributed REAL NOT NULL,
    sample_count INTEGER NOT NULL,
    partial INTEGER NOT NULL,
    PRIMARY KEY (meter_id, date)
);
)sql";

[[noreturn]] void fail(sqlite3* db, const std::string& what) {
    throw Error(ErrorCode::StoreFailure, what + ": " + (db ? sqlite3_errmsg(db) : "no database"));
}

class Statement {
public:
    Statement(sqlite3* db, const char* sql) : db_(db) {
        if (sqlite3_prepare_v2(db, sql, -1, &stmt_, nullptr) != SQLITE_OK) {
            fail(db, "prepare");
        }
    }
    ~Statement() { sqlite3_finalize(stmt_); }
    Statement(const Statement&) = delete;
    Statement& operator=(const Statement&) = delete;

    Statement& bind(int idx, std::string_view text) {
        check(sqlite3_bind_text(stmt_, idx, text.data(), static_cast<int>(text.size()), SQLITE_TRANSIENT));
        return *this;
    }
    Statement& bind(int idx, double value) {
        check(sqlite3_bind_double(stmt_, idx, value));
        return *this;
    }
    Statement& bind(int idx, std::int64_t value) {
        check(sqlite3_bind_int64(stmt_, idx, value));
        return *this;
    }

    /// True while a row is available.
    bool step() {
        const int rc = sqlite3_step(stmt_);
        if (rc == SQLITE_ROW) {
            return true;
        }
        if (rc == SQLITE_DONE) {
            return false;
        }
        fail(db_, "step");
    }

    /// Runs to completion; returns the extended result code instead of throwing on constraint errors.
    int run() {
        const int rc = sqlite3_step(stmt_);
        return rc == SQLITE_DONE ? SQLITE_OK : sqlite3_extended_errcode(db_);
    }

    void reset() {
        sqlite3_reset(stmt_);
        sqlite3_clear_bindings(stmt_);
    }

    std::string text(int col) const {
        const auto* p = reinterpret_cast<const char*>(sqlite3_column_text(stmt_, col));
        return p ? std::string(p, static_cast<std::size_t>(sqlite3_column_bytes(stmt_, col))) : std::string{};
    }
    double real(int col) const { return sqlite3_column_double(stmt_, col); }
    std::int64_t integer(int col) const { return sqlite3_column_int64(stmt_, col); }
    bool is_null(int col) const { return sqlite3_column_type(stmt_, col) == SQLITE_NULL; }

private:
    void check(int rc) {
        if (rc != SQLITE_OK) {
            fail(db_, "bind");
        }
    }

    sqlite3* db_;
    sqlite3_stmt* stmt_ = nullptr;
};

class Transaction {
public:
    explicit Transaction(sqlite3* db) : db_(db) { run("BEGIN IMMEDIATE"); }
    ~Transaction() {
        if (!done_) {
            sqlite3_exec(db_, "ROLLBACK", nullptr, nullptr, nullptr);
        }
    }
    void commit() {
        run("COMMIT");
        done_ = true;
    }

private:
    void run(const char* sql) {
        if (sqlite3_exec(db_, sql, nullptr, nullptr, nullptr) != SQLITE_OK) {
            fail(db_, sql);
        }
    }
    sqlite3* db_;
    bool done_ = false;
};

Date parse_stored_date(const std::string& text) {
    const auto d = parse_date(text);
    if (!d) {
        throw Error(ErrorCode::StoreFailure, "corrupt date '" + text + "' in store");
    }
    return *d;
}

std::int64_t epoch(Timestamp ts) { return ts.time_since_epoch().count(); }

Timestamp from_epoch(std::int64_t s) { return Timestamp{std::chrono::seconds{s}}; }

// Median spacing; falls back to 1 s when there is nothing to measure.
double nominal_interval(const std::vector<nilm::Sample>& samples) {
    if (samples.size() < 2) {
        return 1.0;
    }
    std::vector<double> gaps;
    gaps.reserve(samples.size() - 1);
    for (std::size_t k = 1; k < samples.size(); ++k) {
        gaps.push_back(static_cast<double>((samples[k].time - samples[k - 1].time).count()));
    }
    std::nth_element(gaps.begin(), gaps.begin() + static_cast<std::ptrdiff_t>(gaps.size() / 2), gaps.end());
    return gaps[gaps.size() / 2];
}

}  // namespace

Store::Store(const std::string& path, std::chrono::seconds day_offset) : day_offset_(day_offset) {
    const int flags = SQLITE_OPEN_READWRITE | SQLITE_OPEN_CREATE | SQLITE_OPEN_FULLMUTEX;
    if (sqlite3_open_v2(path.c_str(), &db_, flags, nullptr) != SQLITE_OK) {
        const std::string msg = db_ ? sqlite3_errmsg(db_) : "out of memory";
        sqlite3_close(db_);
        db_ = nullptr;
        throw Error(ErrorCode::StoreFailure, "cannot open store '" + path + "': " + msg);
    }
    sqlite3_busy_timeout(db_, 5000);
    try {
        exec("PRAGMA foreign_keys = ON");
        exec("PRAGMA journal_mode = WAL");
        exec("PRAGMA synchronous = NORMAL");
        exec(kSchema);
    } catch (...) {
        sqlite3_close(db_);
        db_ = nullptr;
        throw;
    }
}

Store::~Store() { sqlite3_close(db_); }

void Store::exec(const char* sql) {
    char* err = nullptr;
    if (sqlite3_exec(db_, sql, nullptr, nullptr, &err) != SQLITE_OK) {
        std::string msg = err ? err : "unknown";
        sqlite3_free(err);
        throw Error(ErrorCode::StoreFailure, "store: " + msg);
    }
}

bool Store::has_meter_locked(std::string_view meter_id) const {
    Statement st(db_, R"(SELECT 1 FROM "meter" WHERE meter_id = ?)");
    st.bind(1, meter_id);
    return st.step();
}

void Store::require_meter(std::string_view meter_id) const {
    if (!has_meter_locked(meter_id)) {
        throw Error(ErrorCode::UnknownMeter, "unknown meter '" + std::string(meter_id) + "'");
    }
}

void Store::register_meter(std::string_view meter_id) {
    if (!is_valid_meter_id(meter_id)) {
        throw Error(ErrorCode::InvalidId, "meter id must be non-empty printable ASCII without '#'");
    }
    std::lock_guard lock(mutex_);
    Statement st(db_, R"(INSERT INTO "meter"(meter_id) VALUES (?))");
    st.bind(1, meter_id);
    const int rc = st.run();
    if (rc == SQLITE_CONSTRAINT_PRIMARYKEY) {
        throw Error(ErrorCode::DuplicateMeter, "meter '" + std::string(meter_id) + "' already registered");
    }
    if (rc != SQLITE_OK) {
        fail(db_, "register_meter");
    }
}

bool Store::has_meter(std::string_view meter_id) const {
    std::lock_guard lock(mutex_);
    return has_meter_locked(meter_id);
}

std::vector<std::string> Store::list_meters() const {
    std::lock_guard lock(mutex_);
    Statement st(db_, R"(SELECT meter_id FROM "meter" ORDER BY meter_id)");
    std::vector<std::string> out;
    while (st.step()) {
        out.push_back(st.text(0));
    }
    return out;
}

void Store::remove_meter(std::string_view meter_id) {
    std::lock_guard lock(mutex_);
    require_meter(meter_id);
    Statement st(db_, R"(DELETE FROM "meter" WHERE meter_id = ?)");
    st.bind(1, meter_id);
    const int rc = st.run();
    if ((rc & 0xff) == SQLITE_CONSTRAINT) {
        throw Error(ErrorCode::DependentsExist,
                    "meter '" + std::string(meter_id) + "' still has loads, readings or results");
    }
    if (rc != SQLITE_OK) {
        fail(db_, "remove_meter");
    }
}

void Store::register_appliance(const LoadRecord& load, double pwr_tol) {
    if (load.name.empty()) {
        throw Error(ErrorCode::ValidationError, "appliance name must not be empty");
    }
    if (!(load.rated_voltage_v > 0.0) || !(load.rated_power_factor > 0.0 && load.rated_power_factor <= 1.0)) {
        throw Error(ErrorCode::ValidationError, "rated voltage must be positive and power factor in (0, 1]");
    }
    std::lock_guard lock(mutex_);
    require_meter(load.meter_id);

    std::vector<nilm::Appliance> set;
    {
        Statement st(db_, R"(SELECT name, rated_voltage_v, rated_power_w FROM "load" WHERE meter_id = ? ORDER BY rowid)");
        st.bind(1, load.meter_id);
        while (st.step()) {
            nilm::Appliance a;
            a.name = st.text(0);
            a.rated_voltage_v = st.real(1);
            a.rated_power_w = st.real(2);
            set.push_back(std::move(a));
        }
    }
    nilm::Appliance candidate;
    candidate.name = load.name;
    candidate.rated_voltage_v = load.rated_voltage_v;
    candidate.rated_power_w = load.rated_power_w;
    set.push_back(candidate);
    nilm::validate_appliance_set(set, pwr_tol);

    Statement st(db_, R"(INSERT INTO "load"(meter_id, name, rated_voltage_v, rated_power_w, rated_power_factor)
                         VALUES (?, ?, ?, ?, ?))");
    st.bind(1, load.meter_id).bind(2, load.name).bind(3, load.rated_voltage_v).bind(4, load.rated_power_w)
        .bind(5, load.rated_power_factor);
    if (st.run() != SQLITE_OK) {
        fail(db_, "register_appliance");
    }
}

std::vector<LoadRecord> Store::list_appliances(std::string_view meter_id) const {
    std::lock_guard lock(mutex_);
    require_meter(meter_id);
    Statement st(db_, R"(SELECT name, rated_voltage_v, rated_power_w, rated_power_factor
                         FROM "load" WHERE meter_id = ? ORDER BY rowid)");
    st.bind(1, meter_id);
    std::vector<LoadRecord> out;
    while (st.step()) {
        out.push_back({std::string(meter_id), st.text(0), st.real(1), st.real(2), st.real(3)});
    }
    return out;
}

std::vector<nilm::Appliance> Store::appliances_for_scan(std::string_view meter_id) const {
    std::vector<nilm::Appliance> out;
    for (const auto& load : list_appliances(meter_id)) {
        nilm::Appliance a;
        a.name = load.name;
        a.rated_voltage_v = load.rated_voltage_v;
        a.rated_power_w = load.rated_power_w;
        out.push_back(std::move(a));
    }
    return out;
}

InsertStatus Store::insert_locked(const MeterFrame& frame) {
    Statement st(db_, R"(INSERT INTO "store"(meter_id, ts, voltage_v, power_w) VALUES (?, ?, ?, ?))");
    st.bind(1, frame.meter_id).bind(2, epoch(frame.timestamp)).bind(3, frame.voltage_v).bind(4, frame.power_w);
    const int rc = st.run();
    switch (rc) {
        case SQLITE_OK: return InsertStatus::Inserted;
        case SQLITE_CONSTRAINT_PRIMARYKEY: return InsertStatus::Duplicate;
        case SQLITE_CONSTRAINT_FOREIGNKEY: return InsertStatus::UnknownMeter;
        default: fail(db_, "insert_reading");
    }
}

InsertStatus Store::insert_reading(const MeterFrame& frame) {
    std::lock_guard lock(mutex_);
    return insert_locked(frame);
}

InsertCounts Store::insert_readings(std::span<const MeterFrame> frames) {
    InsertCounts counts;
    if (frames.empty()) {
        return counts;
    }
    std::lock_guard lock(mutex_);
    Transaction tx(db_);
    Statement st(db_, R"(INSERT INTO "store"(meter_id, ts, voltage_v, power_w) VALUES (?, ?, ?, ?))");
    for (const auto& frame : frames) {
        st.bind(1, frame.meter_id).bind(2, epoch(frame.timestamp)).bind(3, frame.voltage_v).bind(4, frame.power_w);
        const int rc = st.run();
        st.reset();
        switch (rc) {
            case SQLITE_OK: ++counts.inserted; break;
            case SQLITE_CONSTRAINT_PRIMARYKEY: ++counts.duplicate; break;
            case SQLITE_CONSTRAINT_FOREIGNKEY: ++counts.unknown_meter; break;
            default: fail(db_, "insert_readings");
        }
    }
    tx.commit();
    return counts;
}

std::vector<MeterFrame> Store::readings_for_day(std::string_view meter_id, Date date) const {
    std::lock_guard lock(mutex_);
    require_meter(meter_id);
    const Timestamp begin = day_start(date, day_offset_);
    const Timestamp end = begin + std::chrono::days{1};
    Statement st(db_, R"(SELECT ts, voltage_v, power_w FROM "store"
                         WHERE meter_id = ? AND ts >= ? AND ts < ? ORDER BY ts)");
    st.bind(1, meter_id).bind(2, epoch(begin)).bind(3, epoch(end));
    std::vector<MeterFrame> out;
    while (st.step()) {
        out.push_back({std::string(meter_id), from_epoch(st.integer(0)), st.real(1), st.real(2)});
    }
    return out;
}

nilm::PowerSeries Store::query_day(std::string_view meter_id, Date date) const {
    nilm::PowerSeries series;
    const auto readings = readings_for_day(meter_id, date);
    series.samples.reserve(readings.size());
    for (const auto& r : readings) {
        series.samples.push_back({r.timestamp, r.power_w});
    }
    series.sample_interval_s = nominal_interval(series.samples);
    return series;
}

std::size_t Store::reading_count(std::string_view meter_id) const {
    std::lock_guard lock(mutex_);
    Statement st(db_, R"(SELECT COUNT(*) FROM "store" WHERE meter_id = ?)");
    st.bind(1, meter_id);
    st.step();
    return static_cast<std::size_t>(st.integer(0));
}

std::size_t Store::reading_count() const {
    std::lock_guard lock(mutex_);
    Statement st(db_, R"(SELECT COUNT(*) FROM "store")");
    st.step();
    return static_cast<std::size_t>(st.integer(0));
}

std::vector<Date> Store::days_with_readings(std::string_view meter_id, Timestamp from, Timestamp until) const {
    std::lock_guard lock(mutex_);
    // Floor division that stays correct for pre-1970 timestamps.
    Statement st(db_, R"(SELECT DISTINCT ((ts + ?1) - (((ts + ?1) % 86400) + 86400) % 86400) / 86400 AS d
                         FROM "store" WHERE meter_id = ?2 AND ts >= ?3 AND ts < ?4 ORDER BY d)");
    st.bind(1, static_cast<std::int64_t>(day_offset_.count())).bind(2, meter_id).bind(3, epoch(from))
        .bind(4, epoch(until));
    std::vector<Date> out;
    while (st.step()) {
        out.emplace_back(std::chrono::sys_days{std::chrono::days{st.integer(0)}});
    }
    return out;
}

std::optional<Timestamp> Store::first_reading_time(std::string_view meter_id) const {
    std::lock_guard lock(mutex_);
    Statement st(db_, R"(SELECT MIN(ts) FROM "store" WHERE meter_id = ?)");
    st.bind(1, meter_id);
    if (!st.step() || st.is_null(0)) {
        return std::nullopt;
    }
    return from_epoch(st.integer(0));
}

std::optional<Timestamp> Store::last_reading_time(std::string_view meter_id) const {
    std::lock_guard lock(mutex_);
    Statement st(db_, R"(SELECT MAX(ts) FROM "store" WHERE meter_id = ?)");
    st.bind(1, meter_id);
    if (!st.step() || st.is_null(0)) {
        return std::nullopt;
    }
    return from_epoch(st.integer(0));
}

void Store::save_nilm_result(std::string_view meter_id, Date date, const nilm::NilmResult& result,
                             std::size_t sample_count, bool partial) {
    std::lock_guard lock(mutex_);
    require_meter(meter_id);
    const std::string day = format_date(date);
    Transaction tx(db_);
    {
        Statement del(db_, R"(DELETE FROM "nilm" WHERE meter_id = ? AND date = ?)");
        del.bind(1, meter_id).bind(2, day);
        if (del.run() != SQLITE_OK) {
            fail(db_, "save_nilm_result");
        }
    }
    Statement ins(db_, R"(INSERT INTO "nilm"(meter_id, name, date, duration_s, energy_wh, share, sessions)
                          VALUES (?, ?, ?, ?, ?, ?, ?))");
    for (std::size_t k = 0; k < result.appliances.size(); ++k) {
        const auto& a = result.appliances[k];
        const double share = k < result.shares.appliances.size() ? result.shares.appliances[k].share : 0.0;
        ins.bind(1, meter_id).bind(2, a.name).bind(3, day).bind(4, a.duration_s).bind(5, a.energy_wh)
            .bind(6, share).bind(7, static_cast<std::int64_t>(a.session_count));
        const int rc = ins.run();
        ins.reset();
        if (rc == SQLITE_CONSTRAINT_FOREIGNKEY) {
            throw Error(ErrorCode::ValidationError, "appliance '" + a.name + "' is not registered on this meter");
        }
        if (rc != SQLITE_OK) {
            fail(db_, "save_nilm_result");
        }
    }
    Statement sum(db_, R"(INSERT INTO "daily_summary"(meter_id, date, energy_kwh, unattributed, sample_count, partial)
                          VALUES (?, ?, ?, ?, ?, ?)
                          ON CONFLICT(meter_id, date) DO UPDATE SET
                            energy_kwh = excluded.energy_kwh, unattributed = excluded.unattributed,
                            sample_count = excluded.sample_count, partial = excluded.partial)");
    sum.bind(1, meter_id).bind(2, day).bind(3, result.shares.total_energy_wh / 1000.0)
        .bind(4, result.shares.unattributed).bind(5, static_cast<std::int64_t>(sample_count))
        .bind(6, static_cast<std::int64_t>(partial ? 1 : 0));
    if (sum.run() != SQLITE_OK) {
        fail(db_, "save_nilm_result");
    }
    tx.commit();
}

std::vector<NilmRecord> Store::fetch_nilm_results(std::string_view meter_id, Date from, Date to) const {
    std::lock_guard lock(mutex_);
    require_meter(meter_id);
    Statement st(db_, R"(SELECT name, date, duration_s, energy_wh, share, sessions FROM "nilm"
                         WHERE meter_id = ? AND date >= ? AND date <= ? ORDER BY date, name)");
    st.bind(1, meter_id).bind(2, format_date(from)).bind(3, format_date(to));
    std::vector<NilmRecord> out;
    while (st.step()) {
        out.push_back({std::string(meter_id), st.text(0), parse_stored_date(st.text(1)), st.real(2), st.real(3),
                       st.real(4), st.integer(5)});
    }
    return out;
}

std::vector<DailySummary> Store::daily_summaries(std::string_view meter_id, Date from, Date to) const {
    std::lock_guard lock(mutex_);
    require_meter(meter_id);
    Statement st(db_, R"(SELECT date, energy_kwh, unattributed, sample_count, partial FROM "daily_summary"
                         WHERE meter_id = ? AND date >= ? AND date <= ? ORDER BY date)");
    st.bind(1, meter_id).bind(2, format_date(from)).bind(3, format_date(to));
    std::vector<DailySummary> out;
    while (st.step()) {
        out.push_back({std::string(meter_id), parse_stored_date(st.text(0)), st.real(1), st.real(2), st.integer(3),
                       st.integer(4) != 0});
    }
    return out;
}

std::optional<DailySummary> Store::daily_summary(std::string_view meter_id, Date date) const {
    auto rows = daily_summaries(meter_id, date, date);
    if (rows.empty()) {
        return std::nullopt;
    }
    return rows.front();
}

std::optional<Date> Store::latest_complete_day(std::string_view meter_id) const {
    std::lock_guard lock(mutex_);
    Statement st(db_, R"(SELECT MAX(date) FROM "daily_summary" WHERE meter_id = ? AND partial = 0)");
    st.bind(1, meter_id);
    st.step();
    const std::string text = st.text(0);
    if (text.empty()) {
        return std::nullopt;
    }
    return parse_stored_date(text);
}

std::optional<Date> Store::latest_summary_day(std::string_view meter_id) const {
    std::lock_guard lock(mutex_);
    Statement st(db_, R"(SELECT MAX(date) FROM "daily_summary" WHERE meter_id = ?)");
    st.bind(1, meter_id);
    st.step();
    const std::string text = st.text(0);
    if (text.empty()) {
        return std::nullopt;
    }
    return parse_stored_date(text);
}

}  // namespace mdms::store
