#ifndef AXF_H
#define AXF_H
#ifdef __cplusplus
extern "C" {
#endif
const char* axf_version(void);
#ifdef __cplusplus
}
#endif
#endif
