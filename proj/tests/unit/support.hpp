#pragma once

#include <cstdlib>
#include <optional>
#include <string>

namespace zvlab_test {

// Sets ZVLAB_THREADS for the lifetime of the guard, restoring it afterwards.
class ThreadsGuard {
public:
    explicit ThreadsGuard(const char* value) {
        if (const char* old = std::getenv("ZVLAB_THREADS")) saved_ = old;
        setenv("ZVLAB_THREADS", value, 1);
    }
    ~ThreadsGuard() {
        if (saved_) {
            setenv("ZVLAB_THREADS", saved_->c_str(), 1);
        } else {
            unsetenv("ZVLAB_THREADS");
        }
    }
    ThreadsGuard(const ThreadsGuard&) = delete;
    ThreadsGuard& operator=(const ThreadsGuard&) = delete;

private:
    std::optional<std::string> saved_;
};

}  // namespace zvlab_test
