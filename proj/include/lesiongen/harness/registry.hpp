#pragma once

#include <functional>
#include <map>
#include <memory>
#include <string>

#include "lesiongen/core/optim.hpp"
#include "lesiongen/core/tensor.hpp"

namespace lesiongen::harness {

enum class Task { classification, segmentation };

Task task_from_string(const std::string& s);
std::string to_string(Task t);

// Downstream model contract: classification forward returns [K] logits,
// segmentation forward returns [1,H,W] logits.
class Model {
public:
    virtual ~Model() = default;
    virtual nn::Tensor forward(const nn::Tensor& image) = 0;
    virtual std::vector<nn::Param> parameters() = 0;
};

using ModelPtr = std::shared_ptr<Model>;
using ModelFactory = std::function<ModelPtr(int num_classes, int input_size, uint64_t seed)>;

// name -> constructor. Full-scale backbones would register here; the built-ins
// are the desk-scale reference CNN and encoder-decoder.
class ArchitectureRegistry {
public:
    void add(Task task, const std::string& name, ModelFactory factory);
    bool contains(Task task, const std::string& name) const;
    ModelPtr create(Task task, const std::string& name, int num_classes, int input_size,
                    uint64_t seed) const;

    static const ArchitectureRegistry& builtins();  // tiny_cnn / tiny_segnet

private:
    std::map<std::pair<Task, std::string>, ModelFactory> factories_;
};

}  // namespace lesiongen::harness
