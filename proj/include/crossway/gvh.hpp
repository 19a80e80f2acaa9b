#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "crossway/core.hpp"
#include "crossway/geometry.hpp"

namespace crossway {

// Closed value tag set for gvh slots. Keeping the set closed keeps the trace
// schema closed for the monitor.
using SlotValue = std::variant<
    std::monostate,            // null
    bool,                      // bool
    Pid,                       // pid
    std::vector<Pid>,          // pid-list
    std::vector<std::string>,  // zone-list
    Vec2,                      // point
    Region,                    // region
    SimTime                    // timestamp
    >;

inline nlohmann::json slot_value_to_json(const SlotValue& v) {
    nlohmann::json j;
    std::visit(
        [&](const auto& x) {
            using T = std::decay_t<decltype(x)>;
            if constexpr (std::is_same_v<T, std::monostate>) {
                j = {{"tag", "null"}, {"v", nullptr}};
            } else if constexpr (std::is_same_v<T, bool>) {
                j = {{"tag", "bool"}, {"v", x}};
            } else if constexpr (std::is_same_v<T, Pid>) {
                j = {{"tag", "pid"}, {"v", x}};
            } else if constexpr (std::is_same_v<T, std::vector<Pid>>) {
                j = {{"tag", "pid_list"}, {"v", x}};
            } else if constexpr (std::is_same_v<T, std::vector<std::string>>) {
                j = {{"tag", "zone_list"}, {"v", x}};
            } else if constexpr (std::is_same_v<T, Vec2>) {
                j = {{"tag", "point"}, {"v", x}};
            } else if constexpr (std::is_same_v<T, Region>) {
                j = {{"tag", "region"}, {"v", x}};
            } else {
                j = {{"tag", "timestamp"}, {"v", x}};
            }
        },
        v);
    return j;
}

inline SlotValue slot_value_from_json(const nlohmann::json& j) {
    auto tag = j.at("tag").get<std::string>();
    const auto& v = j.at("v");
    if (tag == "null") return std::monostate{};
    if (tag == "bool") return v.get<bool>();
    if (tag == "pid") return v.get<Pid>();
    if (tag == "pid_list") return v.get<std::vector<Pid>>();
    if (tag == "zone_list") return v.get<std::vector<std::string>>();
    if (tag == "point") return v.get<Vec2>();
    if (tag == "region") return v.get<Region>();
    if (tag == "timestamp") return v.get<SimTime>();
    throw MalformedTrace("unknown slot value tag '" + tag + "'");
}

// Per-process global variable holder: write-one (single registered writer per
// slot), read-many status store through which primitives report to the
// application. Slot keys are "instance.field", e.g. "mux.crit".
class Gvh {
  public:
    using PublishHook = std::function<void(const std::string& key, const SlotValue& value,
                                           std::uint64_t version, const std::string& writer)>;

    explicit Gvh(Pid owner_pid, PublishHook hook = nullptr)
        : pid_(owner_pid), hook_(std::move(hook)) {}

    Pid owner_pid() const { return pid_; }

    void register_slot(const std::string& writer, const std::string& key) {
        auto [it, inserted] = slots_.try_emplace(key, Slot{writer, std::monostate{}, 0});
        if (!inserted)
            throw SlotAlreadyOwned("slot '" + key + "' already owned by '" + it->second.writer + "'");
    }

    std::uint64_t publish(const std::string& writer, const std::string& key, SlotValue value) {
        auto it = slots_.find(key);
        if (it == slots_.end()) throw UnknownSlot("publish to unregistered slot '" + key + "'");
        if (it->second.writer != writer)
            throw NotOwner("'" + writer + "' is not the writer of slot '" + key + "'");
        it->second.value = std::move(value);
        ++it->second.version;  // versions count writes, not changes
        if (hook_) hook_(key, it->second.value, it->second.version, writer);
        return it->second.version;
    }

    std::pair<SlotValue, std::uint64_t> read(const std::string& key) const {
        auto it = slots_.find(key);
        if (it == slots_.end()) throw UnknownSlot("read of unregistered slot '" + key + "'");
        return {it->second.value, it->second.version};
    }

    bool has_slot(const std::string& key) const { return slots_.count(key) != 0; }

    // Typed convenience reads; null or a different tag yields fallback.
    template <typename T>
    T read_or(const std::string& key, T fallback) const {
        auto [v, ver] = read(key);
        if (auto* p = std::get_if<T>(&v)) return *p;
        return fallback;
    }

    bool is_null(const std::string& key) const {
        return std::holds_alternative<std::monostate>(read(key).first);
    }

  private:
    struct Slot {
        std::string writer;
        SlotValue value;
        std::uint64_t version = 0;
    };

    Pid pid_;
    PublishHook hook_;
    std::map<std::string, Slot> slots_;
};

}  // namespace crossway
