# Errors, JSON storage and image files
