#include "kffi/registry.hpp"

#include "kffi/errors.hpp"

#include <algorithm>

namespace kffi {

std::string_view to_string(SymbolKind kind) noexcept {
    switch (kind) {
    case SymbolKind::function: return "function";
    case SymbolKind::class_type: return "class";
    case SymbolKind::variable: return "variable";
    }
    return "unknown";
}

json SymbolRecord::to_json() const {
    json out = json::object();
    out["name"] = name;
    out["kind"] = to_string(kind);
    out["kernel_id"] = kernel_id;
    out["lang"] = lang;
    out["params"] = params;
    out["variadic"] = variadic;
    if (kind == SymbolKind::class_type) {
        json methods_json = json::array();
        for (const auto& m : methods) {
            json entry = json::object();
            entry["name"] = m.name;
            entry["params"] = m.params;
            entry["variadic"] = m.variadic;
            methods_json.push_back(std::move(entry));
        }
        out["methods"] = std::move(methods_json);
        if (base) out["base"] = *base;
    }
    out["cell_id"] = cell_id;
    out["version"] = version;
    return out;
}

std::optional<SymbolRecord> RegistrySnapshot::lookup(const std::string& kernel_id,
                                                     const std::string& name) const {
    auto it = visible_.find({kernel_id, name});
    if (it == visible_.end()) return std::nullopt;
    return it->second.record;
}

SymbolRecord RegistrySnapshot::resolve(const std::string& name, const std::string& client_kernel) const {
    if (const auto colon = name.find(':'); colon != std::string::npos) {
        const auto kernel = name.substr(0, colon);
        const auto bare = name.substr(colon + 1);
        if (kernel != client_kernel) {
            if (auto rec = lookup(kernel, bare)) return *rec;
        }
        throw NotFound("no foreign symbol '" + name + "' visible from kernel " + client_kernel);
    }
    std::vector<const Visible*> candidates;
    for (const auto& [key, visible] : visible_) {
        if (key.second == name && key.first != client_kernel) candidates.push_back(&visible);
    }
    if (candidates.empty()) {
        throw NotFound("no foreign symbol '" + name + "' visible from kernel " + client_kernel);
    }
    if (candidates.size() > 1) {
        std::sort(candidates.begin(), candidates.end(),
                  [](const Visible* a, const Visible* b) { return a->seq > b->seq; });
        std::string listing;
        for (const auto* c : candidates) {
            if (!listing.empty()) listing += ", ";
            listing += c->record.qualified_name();
        }
        throw AmbiguousSymbol("symbol '" + name + "' is defined by several kernels: " + listing +
                              "; qualify it as kernel:name");
    }
    return candidates.front()->record;
}

std::vector<SymbolRecord> RegistrySnapshot::records() const {
    std::vector<SymbolRecord> out;
    out.reserve(visible_.size());
    for (const auto& [key, visible] : visible_) out.push_back(visible.record);
    return out;
}

Registry::Registry() : snapshot_(std::make_shared<const RegistrySnapshot>()) {}

RegistryDiff Registry::apply(CellDeclaration cell) {
    std::lock_guard lock(mutex_);
    for (auto& decl : cell.declarations) {
        decl.kernel_id = cell.kernel_id;
        decl.lang = cell.lang;
        decl.cell_id = cell.cell_id;
        decl.version = ++versions_[{cell.kernel_id, decl.name}];
    }
    auto id = cell.cell_id;
    cells_[id] = CellEntry{std::move(cell), next_seq_++};
    return rebuild();
}

RegistryDiff Registry::remove_cell(const std::string& cell_id) {
    std::lock_guard lock(mutex_);
    cells_.erase(cell_id);
    return rebuild();
}

std::shared_ptr<const RegistrySnapshot> Registry::snapshot() const {
    std::lock_guard lock(mutex_);
    return snapshot_;
}

RegistryDiff Registry::rebuild() {
    auto next = std::make_shared<RegistrySnapshot>();
    for (const auto& [id, entry] : cells_) {
        for (const auto& decl : entry.cell.declarations) {
            RegistrySnapshot::Key key{decl.kernel_id, decl.name};
            auto it = next->visible_.find(key);
            if (it == next->visible_.end() || it->second.seq <= entry.seq) {
                next->visible_[key] = RegistrySnapshot::Visible{decl, entry.seq};
            }
        }
    }

    RegistryDiff diff;
    const auto& before = snapshot_->visible_;
    for (const auto& [key, visible] : next->visible_) {
        auto it = before.find(key);
        const auto qualified = visible.record.qualified_name();
        if (it == before.end()) {
            diff.added.push_back(qualified);
        } else if (it->second.record.version != visible.record.version ||
                   it->second.record.cell_id != visible.record.cell_id) {
            diff.updated.push_back(qualified);
        }
    }
    for (const auto& [key, visible] : before) {
        if (next->visible_.count(key) == 0) diff.removed.push_back(visible.record.qualified_name());
    }
    snapshot_ = std::move(next);
    return diff;
}

} // namespace kffi
