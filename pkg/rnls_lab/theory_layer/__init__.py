# Closed-form results
