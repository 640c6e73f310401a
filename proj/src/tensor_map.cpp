// SPDX-License-Identifier: Apache-2.0
#include "dot/tensor_map.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include "dot/csv.hpp"

namespace dot {

void TensorMap::add(std::string name, Tensor value) {
    if (name.empty()) throw std::invalid_argument("TensorMap::add: empty name");
    if (contains(name)) throw std::invalid_argument("TensorMap::add: duplicate name '" + name + "'");
    names_.push_back(name);
    index_.emplace(std::move(name), std::move(value));
}

const Tensor& TensorMap::at(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw std::out_of_range("TensorMap: no tensor named '" + name + "'");
    return it->second;
}

Tensor& TensorMap::at(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end()) throw std::out_of_range("TensorMap: no tensor named '" + name + "'");
    return it->second;
}

std::size_t TensorMap::total_elements() const {
    std::size_t n = 0;
    for (const std::string& name : names_) n += at(name).size();
    return n;
}

TensorMap TensorMap::zeros_like(const TensorMap& other) {
    TensorMap result;
    for (const std::string& name : other.names()) {
        result.add(name, Tensor(other.at(name).shape()));
    }
    return result;
}

bool TensorMap::operator==(const TensorMap& other) const {
    if (names_ != other.names_) return false;
    for (const std::string& name : names_) {
        if (!(at(name) == other.at(name))) return false;
    }
    return true;
}

std::string tensors_to_string(const TensorMap& tensors) {
    std::ostringstream out;
    for (const std::string& name : tensors.names()) {
        const Tensor& t = tensors.at(name);
        out << name << ' ';
        const auto& shape = t.shape();
        for (std::size_t i = 0; i < shape.size(); ++i) {
            if (i) out << ',';
            out << shape[i];
        }
        if (shape.empty()) out << "scalar";
        out << ' ';
        for (std::size_t i = 0; i < t.size(); ++i) {
            if (i) out << ',';
            out << format_double(t[i]);
        }
        out << '\n';
    }
    return out.str();
}

TensorMap tensors_from_string(const std::string& text) {
    TensorMap result;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> fields = split(line, ' ');
        if (fields.size() != 3) {
            throw std::invalid_argument("tensor format: expected 'name shape_csv value_csv', got '" + line + "'");
        }
        std::vector<std::size_t> shape;
        if (fields[1] != "scalar") {
            for (const std::string& dim : split(fields[1], ',')) {
                shape.push_back(static_cast<std::size_t>(std::stoull(dim)));
            }
        }
        std::vector<double> values;
        for (const std::string& token : split(fields[2], ',')) {
            values.push_back(parse_double(token));
        }
        result.add(fields[0], Tensor(std::move(shape), std::move(values)));
    }
    return result;
}

void save_tensors(const TensorMap& tensors, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("save_tensors: cannot open '" + path + "' for writing");
    out << tensors_to_string(tensors);
    out.flush();
    if (!out) throw IoError("save_tensors: write to '" + path + "' failed");
}

TensorMap load_tensors(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("load_tensors: cannot open '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return tensors_from_string(buf.str());
}

}  // namespace dot
