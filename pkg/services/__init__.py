# Geometry, rendering, metrics and viewpoint optimization
