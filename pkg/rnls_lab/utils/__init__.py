# Shared utilities: logging and memoization
