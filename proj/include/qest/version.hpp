#ifndef QEST_VERSION_HPP
#define QEST_VERSION_HPP

#define QEST_VERSION "0.1.0"

#endif
