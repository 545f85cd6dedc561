# RoadKG: road-user behavior prediction over knowledge graphs