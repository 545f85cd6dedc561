# Core modules