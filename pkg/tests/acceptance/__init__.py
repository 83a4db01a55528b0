# Acceptance tests module
