#include "texpro/tensor/tensor.hpp"

#include <sstream>
#include <stdexcept>
#include <unordered_set>

namespace texpro::tc {

std::string shape_str(const std::vector<int>& shape) {
    std::ostringstream os;
    os << "[";
    for (size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ",";
        os << shape[i];
    }
    os << "]";
    return os.str();
}

Tensor Tensor::constant(std::vector<int> shape, std::vector<real> data) {
    auto impl = std::make_shared<TensorImpl>();
    impl->shape = std::move(shape);
    impl->data = std::move(data);
    if (static_cast<int64_t>(impl->data.size()) != impl->numel())
        throw std::invalid_argument("tensor: data length " + std::to_string(impl->data.size()) +
                                    " does not match shape " + shape_str(impl->shape));
    return Tensor(std::move(impl));
}

Tensor Tensor::full(std::vector<int> shape, real value) {
    auto impl = std::make_shared<TensorImpl>();
    impl->shape = std::move(shape);
    impl->data.assign(static_cast<size_t>(impl->numel()), value);
    return Tensor(std::move(impl));
}

Tensor Tensor::leaf(std::vector<int> shape, std::vector<real> data, Tape& tape) {
    Tensor t = constant(std::move(shape), std::move(data));
    t.impl()->requires_grad = true;
    t.impl()->tape = &tape;
    return t;
}

real Tensor::item() const {
    if (numel() != 1)
        throw std::invalid_argument("item: tensor has shape " + shape_str(shape()) + ", expected a scalar");
    return impl_->data[0];
}

void Tensor::set_data(const std::vector<real>& values) {
    if (values.size() != impl_->data.size())
        throw std::invalid_argument("set_data: size mismatch");
    impl_->data = values;
}

void Tape::backward(const Tensor& root) {
    if (root.numel() != 1)
        throw std::invalid_argument("backward: root has shape " + shape_str(root.shape()) +
                                    ", expected a scalar");
    root.impl()->ensure_grad();
    root.impl()->grad[0] += 1.0;

    // Reverse sweep restricted to ancestors of root so values off the path
    // keep zero grads.
    std::unordered_set<const TensorImpl*> active;
    active.insert(root.impl().get());
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
        if (!active.count(it->out.get())) continue;
        it->out->ensure_grad();
        if (it->bwd) it->bwd(*it);
        for (const auto& in : it->in)
            if (in->requires_grad) active.insert(in.get());
    }
}

void Tape::replay() {
    for (auto& node : nodes_)
        if (node.fwd) node.fwd(node);
}

void Tape::zero_grad() {
    for (auto& node : nodes_) {
        for (auto& in : node.in)
            if (!in->grad.empty()) in->grad.assign(in->grad.size(), 0.0);
        if (node.out && !node.out->grad.empty()) node.out->grad.assign(node.out->grad.size(), 0.0);
    }
}

}  // namespace texpro::tc
