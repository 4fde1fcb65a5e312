#include "rmd/skeleton.hpp"

#include "rmd/errors.hpp"
#include "rmd/json_io.hpp"

namespace rmd {

void SkeletonDef::validate() const {
    const std::size_t j = joint_names.size();
    if (j == 0) throw std::invalid_argument("skeleton: no joints");
    if (parent_index.size() != j || rest_offsets.size() != j)
        throw std::invalid_argument("skeleton: field sizes disagree");

    int roots = 0;
    for (std::size_t i = 0; i < j; ++i) {
        if (parent_index[i] < 0) {
            ++roots;
            if (i != 0) throw std::invalid_argument("skeleton: root must be joint 0");
        } else if (parent_index[i] >= static_cast<int>(i)) {
            throw std::invalid_argument("skeleton: parent_index must be topologically ordered");
        }
    }
    if (roots != 1) throw std::invalid_argument("skeleton: exactly one root required");
}

int SkeletonDef::index_of(const std::string& name) const {
    for (std::size_t i = 0; i < joint_names.size(); ++i)
        if (joint_names[i] == name) return static_cast<int>(i);
    throw std::invalid_argument("skeleton: unknown joint name: " + name);
}

SkeletonDef load_skeleton(const std::string& path) {
    json j = read_json_file(path);
    SkeletonDef s;
    try {
        s.joint_names = j.at("joint_names").get<std::vector<std::string>>();
        s.parent_index = j.at("parent_index").get<std::vector<int>>();
        for (const auto& o : j.at("rest_offsets"))
            s.rest_offsets.push_back({o.at(0).get<double>(), o.at(1).get<double>(), o.at(2).get<double>()});
    } catch (const json::exception& e) {
        throw InputError(path + ": bad skeleton file: " + e.what());
    }
    s.validate();
    return s;
}

}  // namespace rmd
